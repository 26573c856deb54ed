#include "signsgd/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace signsgd {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::kConfigInvalid, what); }

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"model", {"kind", "input_dim", "hidden_dim", "num_classes"}},
      {"data", {"source", "n_samples", "noise", "images", "labels"}},
      {"optimizer",
       {"rule", "eta", "beta", "weight_decay", "batch_size", "decay_factor", "decay_every"}},
      {"adversary", {"strategy", "alpha", "p_estimate"}},
      {"run", {"workers", "iterations", "seed", "eval_every", "threads", "track_replicas"}},
  };
  return keys;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  invalid("expected a boolean, got '" + std::string(v) + "'");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    invalid("expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

std::uint64_t parse_unsigned(std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    invalid("expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig kv;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error(ErrorKind::kConfigParse, "line " + std::to_string(line_no) + ": unclosed section");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || section.empty()) {
      throw Error(ErrorKind::kConfigParse,
                  "line " + std::to_string(line_no) + ": expected 'key = value' inside a section");
    }
    kv.set(section, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::kConfigNotFound, "config file not found: " + path.string());
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfigNotFound, "cannot read config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();

  if (path.extension() != ".json") return parse(buf.str());

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigParse, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.contains("config") || !doc["config"].is_object()) {
    throw Error(ErrorKind::kConfigParse, "JSON config needs a top-level \"config\" object");
  }
  KeyValueConfig kv;
  for (const auto& [section, entries] : doc["config"].items()) {
    for (const auto& [key, value] : entries.items()) {
      kv.set(section, key, value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  return kv;
}

void KeyValueConfig::set(const std::string& section, const std::string& key, std::string value) {
  sections_[section][key] = std::move(value);
}

void KeyValueConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    throw Error(ErrorKind::kConfigParse,
                "override must look like section.key=value, got '" + std::string(assignment) + "'");
  }
  set(std::string(trim(assignment.substr(0, dot))),
      std::string(trim(assignment.substr(dot + 1, eq - dot - 1))),
      std::string(trim(assignment.substr(eq + 1))));
}

const std::string* KeyValueConfig::find(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [section, entries] : sections_) {
    if (!out.empty()) out += '\n';
    out += '[' + section + "]\n";
    for (const auto& [key, value] : entries) out += key + " = " + value + '\n';
  }
  return out;
}

ExperimentConfig to_experiment(const KeyValueConfig& kv) {
  for (const auto& [section, entries] : kv.sections()) {
    const auto known = known_keys().find(section);
    if (known == known_keys().end()) invalid("unknown config section [" + section + "]");
    for (const auto& [key, value] : entries) {
      if (!known->second.contains(key)) invalid("unknown config key " + section + "." + key);
    }
  }

  ExperimentConfig cfg;
  auto get = [&](const char* section, const char* key, auto&& apply) {
    if (const std::string* v = kv.find(section, key); v && !v->empty()) {
      try {
        apply(*v);
      } catch (const Error& e) {
        invalid(std::string(section) + "." + key + ": " + e.what());
      }
    }
  };
  auto size = [](const std::string& v) { return static_cast<std::size_t>(parse_unsigned(v)); };

  get("model", "kind", [&](const std::string& v) { cfg.model.kind = parse_model_kind(v); });
  get("model", "input_dim", [&](const std::string& v) { cfg.model.input_dim = size(v); });
  get("model", "hidden_dim", [&](const std::string& v) { cfg.model.hidden_dim = size(v); });
  get("model", "num_classes", [&](const std::string& v) { cfg.model.num_classes = size(v); });

  get("data", "source", [&](const std::string& v) {
    if (v == "synthetic") {
      cfg.data.kind = DataSource::Kind::kSynthetic;
    } else if (v == "idx") {
      cfg.data.kind = DataSource::Kind::kIdx;
    } else {
      invalid("data.source must be synthetic or idx");
    }
  });
  get("data", "n_samples", [&](const std::string& v) { cfg.data.n_samples = size(v); });
  get("data", "noise", [&](const std::string& v) { cfg.data.noise_level = parse_double(v); });
  get("data", "images", [&](const std::string& v) { cfg.data.images = v; });
  get("data", "labels", [&](const std::string& v) { cfg.data.labels = v; });

  get("optimizer", "rule", [&](const std::string& v) {
    cfg.optimizer.rule = parse_rule(v);
    if (cfg.optimizer.rule == Rule::kSignSgd) cfg.optimizer.beta = 0.0;
  });
  get("optimizer", "eta", [&](const std::string& v) { cfg.optimizer.eta = parse_double(v); });
  get("optimizer", "beta", [&](const std::string& v) { cfg.optimizer.beta = parse_double(v); });
  get("optimizer", "weight_decay",
      [&](const std::string& v) { cfg.optimizer.weight_decay = parse_double(v); });
  get("optimizer", "batch_size", [&](const std::string& v) { cfg.optimizer.batch_size = size(v); });
  get("optimizer", "decay_factor",
      [&](const std::string& v) { cfg.optimizer.decay_factor = parse_double(v); });
  get("optimizer", "decay_every", [&](const std::string& v) { cfg.optimizer.decay_every = size(v); });

  get("adversary", "strategy", [&](const std::string& v) { cfg.strategy = parse_strategy(v); });
  get("adversary", "alpha", [&](const std::string& v) { cfg.alpha = parse_double(v); });
  get("adversary", "p_estimate", [&](const std::string& v) { cfg.p_estimate = parse_double(v); });

  get("run", "workers", [&](const std::string& v) { cfg.workers = size(v); });
  get("run", "iterations", [&](const std::string& v) { cfg.iterations = size(v); });
  get("run", "seed", [&](const std::string& v) { cfg.seed = parse_unsigned(v); });
  get("run", "eval_every", [&](const std::string& v) { cfg.eval_every = size(v); });
  get("run", "threads", [&](const std::string& v) { cfg.threads = size(v); });
  get("run", "track_replicas", [&](const std::string& v) { cfg.track_replicas = parse_bool(v); });

  if (cfg.model.input_dim == 0) invalid("model.input_dim is required");
  return cfg;
}

KeyValueConfig from_experiment(const ExperimentConfig& cfg) {
  KeyValueConfig kv;
  kv.set("model", "kind", std::string(to_string(cfg.model.kind)));
  kv.set("model", "input_dim", std::to_string(cfg.model.input_dim));
  kv.set("model", "hidden_dim", std::to_string(cfg.model.hidden_dim));
  kv.set("model", "num_classes", std::to_string(cfg.model.num_classes));

  const bool idx = cfg.data.kind == DataSource::Kind::kIdx;
  kv.set("data", "source", idx ? "idx" : "synthetic");
  kv.set("data", "n_samples", std::to_string(cfg.data.n_samples));
  kv.set("data", "noise", format_double(cfg.data.noise_level));
  kv.set("data", "images", cfg.data.images.string());
  kv.set("data", "labels", cfg.data.labels.string());

  kv.set("optimizer", "rule", std::string(to_string(cfg.optimizer.rule)));
  kv.set("optimizer", "eta", format_double(cfg.optimizer.eta));
  kv.set("optimizer", "beta", format_double(cfg.optimizer.beta));
  kv.set("optimizer", "weight_decay", format_double(cfg.optimizer.weight_decay));
  kv.set("optimizer", "batch_size", std::to_string(cfg.optimizer.batch_size));
  kv.set("optimizer", "decay_factor", format_double(cfg.optimizer.decay_factor));
  kv.set("optimizer", "decay_every", std::to_string(cfg.optimizer.decay_every));

  kv.set("adversary", "strategy", std::string(to_string(cfg.strategy)));
  kv.set("adversary", "alpha", format_double(cfg.alpha));
  kv.set("adversary", "p_estimate", cfg.p_estimate ? format_double(*cfg.p_estimate) : "");

  kv.set("run", "workers", std::to_string(cfg.workers));
  kv.set("run", "iterations", std::to_string(cfg.iterations));
  kv.set("run", "seed", std::to_string(cfg.seed));
  kv.set("run", "eval_every", std::to_string(cfg.eval_every));
  kv.set("run", "threads", std::to_string(cfg.threads));
  kv.set("run", "track_replicas", cfg.track_replicas ? "true" : "false");
  return kv;
}

}  // namespace signsgd
