// SPDX-License-Identifier: Apache-2.0
#include "smoe/exp/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

namespace smoe::exp {

namespace {

// Walks JSON text that is already known to be valid and records every key path.
class KeyScanner {
 public:
  KeyScanner(std::string_view text, std::vector<std::pair<std::string, std::size_t>>& out)
      : s_(text), out_(out) {}

  void run() { value(""); }

 private:
  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
      if (s_[i_] == '\n') ++line_;
      ++i_;
    }
  }

  std::string string_token() {
    std::string out;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\' && i_ + 1 < s_.size()) {
        out += s_[i_ + 1];
        i_ += 2;
        continue;
      }
      out += s_[i_++];
    }
    ++i_;
    return out;
  }

  void value(const std::string& path) {
    skip_ws();
    if (i_ >= s_.size()) return;
    const char c = s_[i_];
    if (c == '{') {
      ++i_;
      skip_ws();
      if (s_[i_] == '}') {
        ++i_;
        return;
      }
      while (i_ < s_.size()) {
        skip_ws();
        const std::size_t line = line_;
        const std::string key = string_token();
        const std::string child = path.empty() ? key : path + "." + key;
        out_.emplace_back(child, line);
        skip_ws();
        ++i_;  // ':'
        value(child);
        skip_ws();
        if (s_[i_++] != ',') return;
      }
    } else if (c == '[') {
      ++i_;
      skip_ws();
      if (s_[i_] == ']') {
        ++i_;
        return;
      }
      for (std::size_t index = 0; i_ < s_.size(); ++index) {
        skip_ws();
        const std::string child = path + "[" + std::to_string(index) + "]";
        out_.emplace_back(child, line_);
        value(child);
        skip_ws();
        if (s_[i_++] != ',') return;
      }
    } else if (c == '"') {
      string_token();
    } else {
      while (i_ < s_.size() && !std::strchr(",}] \t\r\n", s_[i_])) ++i_;
    }
  }

  std::string_view s_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::vector<std::pair<std::string, std::size_t>>& out_;
};

bool ends_with_path(const std::string& path, const std::string& tail) {
  if (path == tail) return true;
  return path.size() > tail.size() && path.compare(path.size() - tail.size(), tail.size(), tail) == 0 &&
         path[path.size() - tail.size() - 1] == '.';
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

std::vector<std::size_t> count_list(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array()) throw ConfigError("sweep." + name + " must be an array");
  std::vector<std::size_t> out;
  for (const auto& v : j) {
    if (!v.is_number_unsigned()) throw ConfigError("sweep." + name + " entries must be non-negative integers");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

SweepSpec parse_sweep(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("sweep must be a JSON object");
  SweepSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "M_list") spec.M_list = count_list(value, key);
    else if (key == "k_list") spec.k_list = count_list(value, key);
    else if (key == "seeds") {
      for (auto s : count_list(value, key)) spec.seeds.push_back(s);
    } else {
      throw ConfigError("unknown key sweep." + key);
    }
  }
  return spec;
}

ExperimentKind parse_kind(const nlohmann::json& j) {
  if (!j.is_string()) throw ConfigError("kind must be a string");
  std::string name = j.get<std::string>();
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
  if (name == "TRAIN") return ExperimentKind::kTrain;
  if (name == "SWEEP") return ExperimentKind::kSweep;
  if (name == "THEORY") return ExperimentKind::kTheory;
  throw ConfigError("kind must be one of TRAIN, SWEEP, THEORY");
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kTrain: return "TRAIN";
    case ExperimentKind::kSweep: return "SWEEP";
    case ExperimentKind::kTheory: return "THEORY";
  }
  return "?";
}

namespace {
std::string located(std::size_t line, const std::string& detail, const std::string& source) {
  const std::string where = line > 0 ? std::to_string(line) : std::string();
  if (source.empty()) return where.empty() ? detail : "line " + where + ": " + detail;
  return source + (where.empty() ? "" : ":" + where) + ": " + detail;
}
}  // namespace

ConfigLocationError::ConfigLocationError(std::size_t line, const std::string& detail,
                                         const std::string& source)
    : ConfigError(located(line, detail, source)), line_(line), detail_(detail) {}

KeyLocator::KeyLocator(std::string_view text) { KeyScanner(text, keys_).run(); }

std::size_t KeyLocator::locate(std::string_view message, std::string_view scope) const {
  static const std::regex dotted(R"([A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)+)");
  auto in_scope = [&](const std::string& path) {
    return scope.empty() || path.rfind(scope, 0) == 0;
  };
  std::size_t best_line = 0;
  std::size_t best_len = 0;
  const std::string msg(message);
  for (auto it = std::sregex_iterator(msg.begin(), msg.end(), dotted); it != std::sregex_iterator(); ++it) {
    const std::string name = it->str();
    const std::string tail = name.substr(name.find('.') + 1);
    for (const auto& [path, line] : keys_) {
      if (!in_scope(path)) continue;
      if ((ends_with_path(path, name) || ends_with_path(path, tail)) && path.size() > best_len) {
        best_line = line;
        best_len = path.size();
      }
    }
  }
  if (best_line > 0) return best_line;
  for (const auto& [path, line] : keys_) {
    if (path == scope) return line;
  }
  return 0;
}

void ExperimentConfig::validate() const {
  switch (kind) {
    case ExperimentKind::kTrain:
      if (!train) throw ConfigError("TRAIN experiment needs a train section");
      if (sweep || !theory.empty()) throw ConfigError("TRAIN experiment takes only a train section");
      train->validate();
      break;
    case ExperimentKind::kSweep: {
      if (!sweep) throw ConfigError("SWEEP experiment needs a sweep section");
      if (!theory.empty()) throw ConfigError("SWEEP experiment does not take a theory section");
      if (sweep->M_list.empty() || sweep->k_list.empty() || sweep->seeds.empty()) {
        throw ConfigError("sweep.M_list, sweep.k_list and sweep.seeds must be non-empty");
      }
      for (const auto& cell : expand_sweep(train.value_or(trainer::TrainConfig{}), *sweep)) {
        try {
          cell.validate();
        } catch (const ConfigError& e) {
          throw ConfigError("sweep cell M=" + std::to_string(cell.num_attributes) +
                            " k_train=" + std::to_string(cell.model.k_train) + ": " + e.what());
        }
      }
      break;
    }
    case ExperimentKind::kTheory:
      if (theory.empty()) throw ConfigError("THEORY experiment needs a non-empty theory list");
      if (train || sweep) throw ConfigError("THEORY experiment takes only a theory section");
      for (const auto& p : theory) p.validate();
      break;
  }
}

ExperimentConfig parse_experiment(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigLocationError(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0), e.what());
  }
  const KeyLocator locator(text);
  auto fail = [&](const std::string& what, std::string_view scope) -> void {
    throw ConfigLocationError(locator.locate(what, scope), what);
  };
  if (!doc.is_object()) throw ConfigLocationError(1, "experiment config must be a JSON object");

  ExperimentConfig cfg;
  bool have_kind = false;
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "kind") {
        cfg.kind = parse_kind(value);
        have_kind = true;
      } else if (key == "train") {
        cfg.train = value.get<trainer::TrainConfig>();
      } else if (key == "sweep") {
        cfg.sweep = parse_sweep(value);
      } else if (key == "theory") {
        if (!value.is_array()) throw ConfigError("theory must be an array of parameter sets");
        for (std::size_t i = 0; i < value.size(); ++i) {
          try {
            cfg.theory.push_back(value[i].get<theory::ErrorModelParams>());
          } catch (const ConfigError& e) {
            fail(e.what(), "theory[" + std::to_string(i) + "]");
          }
        }
      } else if (key == "output_dir") {
        if (!value.is_string()) throw ConfigError("output_dir must be a string");
        cfg.output_dir = value.get<std::string>();
      } else {
        throw ConfigError("unknown top-level key '" + key + "'");
      }
    } catch (const ConfigLocationError&) {
      throw;
    } catch (const ConfigError& e) {
      fail(e.what(), key);
    }
  }
  if (!have_kind) throw ConfigLocationError(1, "missing required key 'kind'");

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const char* scope = cfg.kind == ExperimentKind::kTheory ? "theory"
                        : cfg.kind == ExperimentKind::kSweep ? "sweep"
                                                             : "train";
    std::size_t line = locator.locate(e.what(), "train");
    if (line == 0) line = locator.locate(e.what(), scope);
    throw ConfigLocationError(line, e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_experiment(text.str());
  } catch (const ConfigLocationError& e) {
    throw ConfigLocationError(e.line(), e.detail(), path.string());
  }
}

std::vector<trainer::TrainConfig> expand_sweep(const trainer::TrainConfig& base, const SweepSpec& sweep) {
  std::vector<trainer::TrainConfig> cells;
  for (auto m : sweep.M_list) {
    for (auto k : sweep.k_list) {
      for (auto seed : sweep.seeds) {
        trainer::TrainConfig cell = base;
        cell.num_attributes = m;
        cell.model.k_train = k;
        cell.seed = seed;
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

}  // namespace smoe::exp
