#include "fastdad/bench/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fastdad/bench/stats.hpp"

namespace fastdad::bench {

namespace {

nlohmann::json cell_json(const CellResult& c) {
  return {{"strategy", c.strategy}, {"student", c.student}, {"seed", c.seed}, {"ok", c.ok},
          {"error", c.error}, {"val_metric", c.val_metric}, {"test_metric", c.test_metric},
          {"parameter_count", c.parameter_count}, {"train_rows", c.train_rows}, {"detail", c.detail}};
}

CellResult cell_from(const nlohmann::json& j) {
  CellResult c;
  c.strategy = j.at("strategy");
  c.student = j.at("student");
  c.seed = j.at("seed");
  c.ok = j.at("ok");
  c.error = j.at("error");
  c.val_metric = j.at("val_metric");
  c.test_metric = j.at("test_metric");
  c.parameter_count = j.at("parameter_count");
  c.train_rows = j.at("train_rows");
  c.detail = j.at("detail");
  return c;
}

nlohmann::json selected_json(const SelectedResult& s) {
  return {{"strategy", s.strategy}, {"seed", s.seed}, {"ok", s.ok}, {"student", s.student},
          {"val_metric", s.val_metric}, {"test_metric", s.test_metric}};
}

SelectedResult selected_from(const nlohmann::json& j) {
  SelectedResult s;
  s.strategy = j.at("strategy");
  s.seed = j.at("seed");
  s.ok = j.at("ok");
  s.student = j.at("student");
  s.val_metric = j.at("val_metric");
  s.test_metric = j.at("test_metric");
  return s;
}

nlohmann::json teacher_json(const TeacherResult& t) {
  return {{"seed", t.seed}, {"ok", t.ok}, {"error", t.error}, {"val_metric", t.val_metric},
          {"test_metric", t.test_metric}, {"blend_weights", t.blend_weights}};
}

TeacherResult teacher_from(const nlohmann::json& j) {
  TeacherResult t;
  t.seed = j.at("seed");
  t.ok = j.at("ok");
  t.error = j.at("error");
  t.val_metric = j.at("val_metric");
  t.test_metric = j.at("test_metric");
  t.blend_weights = j.at("blend_weights").get<std::vector<double>>();
  return t;
}

}  // namespace

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json teacher = nlohmann::json::array(), cells = nlohmann::json::array(),
                 selected = nlohmann::json::array(), summary = nlohmann::json::array(),
                 ranks = nlohmann::json::array();
  for (const auto& t : r.teacher) teacher.push_back(teacher_json(t));
  for (const auto& c : r.cells) cells.push_back(cell_json(c));
  for (const auto& s : r.selected) selected.push_back(selected_json(s));
  for (const auto& s : r.summary) {
    summary.push_back({{"strategy", s.strategy}, {"student", s.student}, {"mean", s.mean}, {"stderr", s.stderr_},
                       {"n_ok", s.n_ok}, {"n_failed", s.n_failed}});
  }
  for (const auto& k : r.ranks) {
    ranks.push_back({{"strategy", k.strategy}, {"average_rank", k.average_rank}, {"n_seeds", k.n_seeds},
                     {"wilcoxon_p_vs_base", k.p_vs_base ? nlohmann::json(*k.p_vs_base) : nlohmann::json()}});
  }
  return {{"format", "fastdad.bench.report"},
          {"version", 1},
          {"config", r.config},
          {"input_hash", r.input_hash},
          {"dataset", r.dataset},
          {"seeds", r.seeds},
          {"strategies", r.strategies},
          {"students", r.students},
          {"density_fits", r.density_fits},
          {"teacher", teacher},
          {"cells", cells},
          {"selected", selected},
          {"summary", summary},
          {"ranks", ranks}};
}

RunReport report_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "fastdad.bench.report" || j.value("version", 0) != 1) {
    throw std::invalid_argument("not a version 1 bench report");
  }
  RunReport r;
  r.config = j.at("config");
  r.input_hash = j.at("input_hash");
  r.dataset = j.at("dataset");
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.strategies = j.at("strategies").get<std::vector<std::string>>();
  r.students = j.at("students").get<std::vector<std::string>>();
  r.density_fits = j.at("density_fits");
  for (const auto& t : j.at("teacher")) r.teacher.push_back(teacher_from(t));
  for (const auto& c : j.at("cells")) r.cells.push_back(cell_from(c));
  for (const auto& s : j.at("selected")) r.selected.push_back(selected_from(s));
  for (const auto& s : j.at("summary")) {
    r.summary.push_back({s.at("strategy"), s.at("student"), s.at("mean"), s.at("stderr"), s.at("n_ok"), s.at("n_failed")});
  }
  for (const auto& k : j.at("ranks")) {
    RankRow row{k.at("strategy"), k.at("average_rank"), k.at("n_seeds"), std::nullopt};
    if (!k.at("wilcoxon_p_vs_base").is_null()) row.p_vs_base = k.at("wilcoxon_p_vs_base").get<double>();
    r.ranks.push_back(row);
  }
  return r;
}

nlohmann::json to_json(const TimingReport& t) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : t.records) {
    recs.push_back({{"strategy", r.strategy}, {"student", r.student}, {"seed", r.seed},
                    {"rows_per_second", r.rows_per_second}});
  }
  return {{"rows", t.rows}, {"repetitions", t.repetitions}, {"threads", 1}, {"records", recs}};
}

void aggregate(RunReport& r) {
  r.summary.clear();
  r.ranks.clear();
  auto add_row = [&](const std::string& strategy, const std::string& student, const std::vector<double>& ok,
                     std::size_t failed) {
    const auto ms = mean_stderr(ok);
    r.summary.push_back({strategy, student, ms.mean, ms.stderr_, ms.n, failed});
  };
  for (const auto& strategy : r.strategies) {
    for (const auto& student : r.students) {
      std::vector<double> ok;
      std::size_t failed = 0;
      for (const auto& c : r.cells) {
        if (c.strategy != strategy || c.student != student) continue;
        if (c.ok) ok.push_back(c.test_metric);
        else ++failed;
      }
      add_row(strategy, student, ok, failed);
    }
    std::vector<double> ok;
    std::size_t failed = 0;
    for (const auto& s : r.selected) {
      if (s.strategy != strategy) continue;
      if (s.ok) ok.push_back(s.test_metric);
      else ++failed;
    }
    add_row(strategy, "selected", ok, failed);
  }

  // (strategy, seed) -> Selected test metric
  std::map<std::pair<std::string, std::uint64_t>, double> sel;
  for (const auto& s : r.selected)
    if (s.ok) sel[{s.strategy, s.seed}] = s.test_metric;

  std::map<std::string, std::pair<double, std::size_t>> rank_sum;
  for (auto seed : r.seeds) {
    std::vector<std::string> names;
    std::vector<double> scores;
    for (const auto& strategy : r.strategies) {
      auto it = sel.find({strategy, seed});
      if (it == sel.end()) continue;
      names.push_back(strategy);
      scores.push_back(it->second);
    }
    const auto ranks = average_ranks(scores);
    for (std::size_t i = 0; i < names.size(); ++i) {
      rank_sum[names[i]].first += ranks[i];
      rank_sum[names[i]].second += 1;
    }
  }
  const bool has_base = std::find(r.strategies.begin(), r.strategies.end(), "BASE") != r.strategies.end();
  for (const auto& strategy : r.strategies) {
    RankRow row;
    row.strategy = strategy;
    const auto& [sum, n] = rank_sum[strategy];
    row.n_seeds = n;
    row.average_rank = n ? sum / static_cast<double>(n) : 0.0;
    if (has_base && strategy != "BASE") {
      std::vector<double> diffs;
      for (auto seed : r.seeds) {
        auto a = sel.find({strategy, seed}), b = sel.find({"BASE", seed});
        if (a != sel.end() && b != sel.end()) diffs.push_back(a->second - b->second);
      }
      row.p_vs_base = wilcoxon_greater_p(diffs);
    }
    r.ranks.push_back(row);
  }
}

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string results_csv(const RunReport& r) {
  std::ostringstream out;
  out << "strategy,student";
  for (auto s : r.seeds) out << ",seed_" << s;
  out << ",mean,stderr\n";
  auto emit = [&](const std::string& strategy, const std::string& student, auto value_of) {
    out << strategy << ',' << student;
    for (auto seed : r.seeds) {
      const auto v = value_of(seed);
      out << ',' << (v ? fixed2(*v) : std::string("FAILED"));
    }
    const SummaryRow* row = nullptr;
    for (const auto& s : r.summary)
      if (s.strategy == strategy && s.student == student) row = &s;
    if (row && row->n_ok > 0) out << ',' << fixed2(row->mean) << ',' << fixed2(row->stderr_) << '\n';
    else out << ",FAILED,FAILED\n";
  };
  for (const auto& strategy : r.strategies) {
    for (const auto& student : r.students) {
      emit(strategy, student, [&](std::uint64_t seed) -> std::optional<double> {
        for (const auto& c : r.cells)
          if (c.strategy == strategy && c.student == student && c.seed == seed && c.ok) return c.test_metric;
        return std::nullopt;
      });
    }
    emit(strategy, "selected", [&](std::uint64_t seed) -> std::optional<double> {
      for (const auto& s : r.selected)
        if (s.strategy == strategy && s.seed == seed && s.ok) return s.test_metric;
      return std::nullopt;
    });
  }
  return out.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void emit_report(const RunReport& report, const TimingReport* timing, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "report.json", to_json(report).dump(2) + "\n");
  write_file(dir / "results.csv", results_csv(report));
  if (timing) write_file(dir / "timing.json", to_json(*timing).dump(2) + "\n");
}

std::string git_blob_hash(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("digest context allocation failed");
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha1 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return git_blob_hash(bytes);
}

}  // namespace fastdad::bench
