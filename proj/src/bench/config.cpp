#include "fastdad/bench/config.hpp"

#include <fstream>
#include <stdexcept>

#include "fastdad/data/csv.hpp"
#include "fastdad/data/synthetic.hpp"
#include "fastdad/data/transform.hpp"

namespace fastdad::bench {

std::string StrategySpec::name() const {
  switch (kind) {
    case Kind::Base: return "BASE";
    case Kind::Know: return "KNOW";
    case Kind::Munge: return "MUNGE";
    case Kind::Hunge: return "HUNGE";
    case Kind::Gib: return "GIB-" + std::to_string(rounds);
  }
  return "?";
}

StrategySpec StrategySpec::parse(const std::string& text) {
  std::string t;
  for (char c : text) t += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t == "BASE") return {Kind::Base, 0};
  if (t == "KNOW") return {Kind::Know, 0};
  if (t == "MUNGE") return {Kind::Munge, 0};
  if (t == "HUNGE") return {Kind::Hunge, 0};
  if (t.rfind("GIB-", 0) == 0 && t.size() > 4) {
    std::size_t used = 0;
    int k = -1;
    try {
      k = std::stoi(t.substr(4), &used);
    } catch (const std::exception&) {
    }
    if (k >= 1 && used == t.size() - 4) return {Kind::Gib, k};
  }
  throw std::invalid_argument("unknown strategy: " + text);
}

bool ExperimentConfig::needs_density_model() const {
  for (const auto& s : strategies)
    if (s.kind == StrategySpec::Kind::Gib) return true;
  return false;
}

bool ExperimentConfig::is_builtin() const {
  for (const auto& n : data::builtin_dataset_names())
    if (n == dataset) return true;
  return false;
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw std::invalid_argument("dataset is required");
  if (strategies.empty()) throw std::invalid_argument("at least one strategy is required");
  if (students.empty()) throw std::invalid_argument("at least one student is required");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  for (const auto& s : students) {
    bool known = false;
    for (const auto& k : learn::learner_kinds()) known = known || k == s;
    if (!known) throw std::invalid_argument("unknown student: " + s);
  }
  for (std::size_t i = 0; i < strategies.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (strategies[i] == strategies[j]) throw std::invalid_argument("duplicate strategy " + strategies[i].name());
  if (multiplier == 0) throw std::invalid_argument("multiplier must be positive");
  if (max_augmented == 0) throw std::invalid_argument("max_augmented must be positive");
  if (is_builtin() && (dataset_rows < 20 || test_rows == 0)) throw std::invalid_argument("built-in dataset too small");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must be in (0, 1)");
  if (latency.enabled && latency.repetitions < 3) throw std::invalid_argument("latency needs at least 3 repetitions");
  if (latency.enabled && latency.rows == 0) throw std::invalid_argument("latency rows must be positive");
  teacher.validate();
  if (!(know.temperature > 0.0)) throw std::invalid_argument("know temperature must be positive");
  if (!(know.hard_weight >= 0.0 && know.hard_weight <= 1.0)) throw std::invalid_argument("know hard_weight must be in [0, 1]");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json strat = nlohmann::json::array();
  for (const auto& s : strategies) strat.push_back(s.name());
  return {{"dataset", dataset},
          {"dataset_rows", dataset_rows},
          {"test_rows", test_rows},
          {"data_seed", data_seed},
          {"target", target},
          {"task", task},
          {"test_path", test_path},
          {"test_fraction", test_fraction},
          {"strategies", strat},
          {"students", students},
          {"multiplier", multiplier},
          {"max_augmented", max_augmented},
          {"seeds", seeds},
          {"teacher", teacher.to_json()},
          {"density", density},
          {"density_epochs", density_epochs},
          {"density_patience", density_patience},
          {"know", {{"temperature", know.temperature}, {"hard_weight", know.hard_weight}}},
          {"latency", {{"enabled", latency.enabled}, {"rows", latency.rows}, {"repetitions", latency.repetitions}}}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  static const char* known[] = {"dataset", "dataset_rows", "test_rows", "data_seed", "target", "task",
                                "test_path", "test_fraction", "strategies", "students", "multiplier",
                                "max_augmented", "seeds", "teacher", "density", "density_epochs",
                                "density_patience", "know", "latency"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("unknown config key: " + key);
  }
  ExperimentConfig c;
  c.dataset = j.value("dataset", c.dataset);
  c.dataset_rows = j.value("dataset_rows", c.dataset_rows);
  c.test_rows = j.value("test_rows", c.test_rows);
  c.data_seed = j.value("data_seed", c.data_seed);
  c.target = j.value("target", c.target);
  c.task = j.value("task", c.task);
  c.test_path = j.value("test_path", c.test_path);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.strategies.clear();
  for (const auto& s : j.value("strategies", std::vector<std::string>{"BASE"})) c.strategies.push_back(StrategySpec::parse(s));
  c.students = j.value("students", c.students);
  c.multiplier = j.value("multiplier", c.multiplier);
  c.max_augmented = j.value("max_augmented", c.max_augmented);
  c.seeds = j.value("seeds", c.seeds);
  if (j.contains("teacher")) c.teacher = learn::StackEnsembleConfig::from_json(j.at("teacher"));
  c.density = j.value("density", c.density);
  c.density_epochs = j.value("density_epochs", c.density_epochs);
  c.density_patience = j.value("density_patience", c.density_patience);
  if (j.contains("know")) {
    c.know.temperature = j.at("know").value("temperature", c.know.temperature);
    c.know.hard_weight = j.at("know").value("hard_weight", c.know.hard_weight);
  }
  if (j.contains("latency")) {
    const auto& l = j.at("latency");
    c.latency.enabled = l.value("enabled", c.latency.enabled);
    c.latency.rows = l.value("rows", c.latency.rows);
    c.latency.repetitions = l.value("repetitions", c.latency.repetitions);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed config " + path.string() + ": " + e.what());
  }
  auto c = from_json(j);
  const auto base = path.parent_path();
  if (!c.is_builtin() && std::filesystem::path(c.dataset).is_relative()) c.dataset = (base / c.dataset).string();
  if (!c.test_path.empty() && std::filesystem::path(c.test_path).is_relative()) c.test_path = (base / c.test_path).string();
  return c;
}

data::Table load_labeled_csv(const std::string& path, const std::string& target, const std::string& task) {
  data::SchemaHints hints;
  std::string name = target;
  if (task == "binary" || task == "multiclass" || task == "classification") {
    // Class labels written as numbers must still be read as categories.
    if (name.empty()) {
      std::ifstream in(path);
      std::string header;
      std::getline(in, header);
      name = header.substr(header.find_last_of(',') + 1);
      if (!name.empty() && name.back() == '\r') name.pop_back();
    }
    hints[name].categorical = true;
    hints[name].sort_categories = true;
  }
  auto t = data::load_csv(path, hints);
  auto& schema = t.mutable_schema();
  std::size_t col = schema.n_columns() - 1;
  if (!target.empty()) {
    const auto idx = schema.index_of(target);
    if (!idx) throw std::invalid_argument("target column not found: " + target);
    col = *idx;
  }
  const auto& kind = schema.column(col).kind;
  const auto parsed = task.empty() ? (kind.is_categorical() ? data::TaskKind::classification(kind.cardinality())
                                                            : data::TaskKind::regression())
                                   : data::TaskKind::parse(task, kind.cardinality());
  schema.set_target(col, parsed);
  return t;
}

Dataset load_dataset(const ExperimentConfig& config) {
  config.validate();
  if (config.is_builtin()) {
    return {data::make_builtin(config.dataset, config.dataset_rows, config.data_seed),
            data::make_builtin(config.dataset, config.test_rows, derive_seed(config.data_seed, {0x7E57}))};
  }
  auto full = load_labeled_csv(config.dataset, config.target, config.task);
  if (!config.test_path.empty()) {
    auto test = data::load_csv_with_schema(config.test_path, full.schema());
    return {std::move(full), std::move(test)};
  }
  auto [pool, test] = data::split_train_val(full, {1.0 - config.test_fraction, config.data_seed});
  return {std::move(pool), std::move(test)};
}

}  // namespace fastdad::bench
