#include "revsum/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "revsum/errors.hpp"

namespace revsum {

using nlohmann::json;

namespace {

template <typename T>
T get(const json& value, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!value.is_number_unsigned()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!value.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!value.is_boolean()) throw ConfigError("");
    } else {
      if (!value.is_string()) throw ConfigError("");
    }
    return value.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + value.dump());
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a flat object");

  RunConfig c;
  auto& m = c.model;
  auto& t = c.train;
  for (const auto& [key, value] : j.items()) {
    if (key == "variant") m.variant = parse_variant(get<std::string>(value, key));
    else if (key == "embedding_dim") m.embedding_dim = get<std::size_t>(value, key);
    else if (key == "hidden_size") m.hidden_size = get<std::size_t>(value, key);
    else if (key == "heads") m.heads = get<std::size_t>(value, key);
    else if (key == "layers") m.layers = get<std::size_t>(value, key);
    else if (key == "dropout") m.dropout = get<double>(value, key);
    else if (key == "trainable_embeddings") m.trainable_embeddings = get<bool>(value, key);
    else if (key == "attention_dim") m.attention_dim = get<std::size_t>(value, key);
    else if (key == "attention_hops") m.attention_hops = get<std::size_t>(value, key);
    else if (key == "epochs") t.epochs = get<std::size_t>(value, key);
    else if (key == "batch_size") t.batch_size = get<std::size_t>(value, key);
    else if (key == "seed") t.seed = get<std::uint64_t>(value, key);
    else if (key == "patience") t.patience = get<std::size_t>(value, key);
    else if (key == "hard_attention_weight") t.hard_attention_weight = get<double>(value, key);
    else if (key == "clip_norm") t.clip_norm = get<double>(value, key);
    else if (key == "learning_rate") t.adam.learning_rate = get<double>(value, key);
    else if (key == "beta1") t.adam.beta1 = get<double>(value, key);
    else if (key == "beta2") t.adam.beta2 = get<double>(value, key);
    else if (key == "epsilon") t.adam.epsilon = get<double>(value, key);
    else if (key == "target_accuracy") t.target_accuracy = get<double>(value, key);
    else if (key == "min_count") c.min_count = get<std::size_t>(value, key);
    else if (key == "embeddings") c.embeddings = get<std::string>(value, key);
    else if (key == "loss_reduction") {
      const auto r = get<std::string>(value, key);
      if (r == "sum") t.reduction = LossReduction::kSum;
      else if (r == "mean") t.reduction = LossReduction::kMean;
      else throw ConfigError("loss_reduction must be \"sum\" or \"mean\", got \"" + r + "\"");
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  m.validate();
  t.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

}  // namespace revsum
