#include "revsum/models.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"
#include "revsum/errors.hpp"
#include "revsum/ops.hpp"
#include "revsum/serialize.hpp"

namespace revsum {

using nlohmann::json;

namespace {

struct VariantEntry {
  ModelVariant variant;
  std::string_view name;
};

constexpr std::array<VariantEntry, 14> kVariants{{
    {ModelVariant::kReviewOnlyPool, "review_only_pool"},
    {ModelVariant::kReviewOnlySelfAttn, "review_only_selfattn"},
    {ModelVariant::kSummaryOnlyPool, "summary_only_pool"},
    {ModelVariant::kSummaryOnlySelfAttn, "summary_only_selfattn"},
    {ModelVariant::kSeparatePool, "separate_pool"},
    {ModelVariant::kSeparateSelfAttn, "separate_selfattn"},
    {ModelVariant::kJointPool, "joint_pool"},
    {ModelVariant::kJointSelfAttn, "joint_selfattn"},
    {ModelVariant::kJointHard, "joint_hard"},
    {ModelVariant::kJointCoAttnReview, "joint_coattn_review"},
    {ModelVariant::kJointCoAttnSummary, "joint_coattn_summary"},
    {ModelVariant::kJointCoAttnConcat, "joint_coattn_concat"},
    {ModelVariant::kReviewCentric, "review_centric"},
    {ModelVariant::kSummaryCentric, "summary_centric"},
}};

constexpr char kCheckpointMagic[8] = {'R', 'V', 'S', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename F>
void visit_tensors(Model& model, F&& fn) {
  fn(model.embeddings);
  auto visit_lstm = [&](LstmParams& p) {
    fn(p.input_weights);
    fn(p.hidden_weights);
    fn(p.bias);
  };
  auto visit_encoder = [&](BiLstmEncoder& e) {
    visit_lstm(e.forward);
    visit_lstm(e.backward);
  };
  for (auto& e : model.review_encoders) visit_encoder(e);
  for (auto& e : model.summary_encoders) visit_encoder(e);
  if (model.joint_encoder) visit_encoder(*model.joint_encoder);
  for (auto& s : model.self_attention) {
    fn(s.projection);
    fn(s.scoring);
  }
  if (model.co_attention) {
    fn(model.co_attention->review_projection);
    fn(model.co_attention->summary_projection);
  }
  for (auto& layer : model.inference) {
    for (std::size_t h = 0; h < layer.heads(); ++h) {
      fn(layer.query[h]);
      fn(layer.key[h]);
      fn(layer.value[h]);
    }
    fn(layer.norm_gain);
    fn(layer.norm_bias);
  }
  fn(model.output_weights);
  fn(model.output_bias);
}

std::vector<int> concat_ids(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

const std::vector<ModelVariant>& all_variants() {
  static const std::vector<ModelVariant> variants = [] {
    std::vector<ModelVariant> v;
    for (const auto& entry : kVariants) v.push_back(entry.variant);
    return v;
  }();
  return variants;
}

std::string_view variant_name(ModelVariant variant) {
  for (const auto& entry : kVariants) {
    if (entry.variant == variant) return entry.name;
  }
  return "unknown";
}

ModelVariant parse_variant(std::string_view name) {
  for (const auto& entry : kVariants) {
    if (entry.name == name) return entry.variant;
  }
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

bool reads_summary(ModelVariant variant) {
  return variant != ModelVariant::kReviewOnlyPool &&
         variant != ModelVariant::kReviewOnlySelfAttn;
}

void ModelConfig::validate() const {
  if (embedding_dim == 0 || hidden_size == 0) {
    throw ConfigError("embedding and hidden sizes must be positive");
  }
  if (heads == 0 || state_width() % heads != 0) {
    throw ConfigError("heads (" + std::to_string(heads) +
                      ") must divide the BiLSTM output width (" +
                      std::to_string(state_width()) + ")");
  }
  if (layers == 0) throw ConfigError("layers must be at least 1");
  if (num_classes != kNumClasses) throw ConfigError("class count must be 5");
  if (vocab_size < 2) throw ConfigError("vocabulary must hold the reserved ids");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
  if (attention_dim == 0 || attention_hops == 0) {
    throw ConfigError("self-attention sizes must be positive");
  }
}

std::string model_config_to_json(const ModelConfig& c) {
  json j = {{"variant", std::string(variant_name(c.variant))},
            {"embedding_dim", c.embedding_dim},
            {"hidden_size", c.hidden_size},
            {"heads", c.heads},
            {"layers", c.layers},
            {"dropout", c.dropout},
            {"num_classes", c.num_classes},
            {"vocab_size", c.vocab_size},
            {"trainable_embeddings", c.trainable_embeddings},
            {"attention_dim", c.attention_dim},
            {"attention_hops", c.attention_hops}};
  return j.dump();
}

ModelConfig parse_model_config(std::string_view json_text) {
  ModelConfig c;
  try {
    const json j = json::parse(json_text);
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.hidden_size = j.at("hidden_size").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.trainable_embeddings = j.at("trainable_embeddings").get<bool>();
    c.attention_dim = j.at("attention_dim").get<std::size_t>();
    c.attention_hops = j.at("attention_hops").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Model m;
  m.config_ = config;
  const std::size_t e = config.embedding_dim;
  const std::size_t d = config.hidden_size;
  const std::size_t width = config.state_width();

  m.embeddings = uniform_parameter({config.vocab_size, e}, 0.1, rng);
  m.embeddings.set_requires_grad(config.trainable_embeddings);

  auto self_attn = [&](std::size_t hops) {
    return SelfAttentionParams::init(width, config.attention_dim, hops, rng);
  };

  switch (config.variant) {
    case ModelVariant::kReviewOnlyPool:
      m.review_encoders.push_back(BiLstmEncoder::init(e, d, rng));
      break;
    case ModelVariant::kReviewOnlySelfAttn:
      m.review_encoders.push_back(BiLstmEncoder::init(e, d, rng));
      m.self_attention.push_back(self_attn(config.attention_hops));
      break;
    case ModelVariant::kSummaryOnlyPool:
      m.summary_encoders.push_back(BiLstmEncoder::init(e, d, rng));
      break;
    case ModelVariant::kSummaryOnlySelfAttn:
      m.summary_encoders.push_back(BiLstmEncoder::init(e, d, rng));
      m.self_attention.push_back(self_attn(config.attention_hops));
      break;
    case ModelVariant::kSeparatePool:
      m.review_encoders.push_back(BiLstmEncoder::init(e, d, rng));
      m.summary_encoders.push_back(BiLstmEncoder::init(e, d, rng));
      break;
    case ModelVariant::kSeparateSelfAttn:
      m.review_encoders.push_back(BiLstmEncoder::init(e, d, rng));
      m.summary_encoders.push_back(BiLstmEncoder::init(e, d, rng));
      m.self_attention.push_back(self_attn(config.attention_hops));
      m.self_attention.push_back(self_attn(config.attention_hops));
      break;
    case ModelVariant::kJointPool:
      m.joint_encoder = BiLstmEncoder::init(e, d, rng);
      break;
    case ModelVariant::kJointSelfAttn:
      m.joint_encoder = BiLstmEncoder::init(e, d, rng);
      m.self_attention.push_back(self_attn(config.attention_hops));
      break;
    case ModelVariant::kJointHard:
      m.joint_encoder = BiLstmEncoder::init(e, d, rng);
      m.self_attention.push_back(self_attn(1));
      break;
    case ModelVariant::kJointCoAttnReview:
    case ModelVariant::kJointCoAttnSummary:
    case ModelVariant::kJointCoAttnConcat:
      m.review_encoders.push_back(BiLstmEncoder::init(e, d, rng));
      m.summary_encoders.push_back(BiLstmEncoder::init(e, d, rng));
      m.co_attention = CoAttentionParams::init(width, rng);
      break;
    case ModelVariant::kReviewCentric:
    case ModelVariant::kSummaryCentric: {
      const bool review_side = config.variant == ModelVariant::kReviewCentric;
      auto& context = review_side ? m.summary_encoders : m.review_encoders;
      auto& stacked = review_side ? m.review_encoders : m.summary_encoders;
      context.push_back(BiLstmEncoder::init(e, d, rng));
      for (std::size_t l = 0; l < config.layers; ++l) {
        stacked.push_back(BiLstmEncoder::init(l == 0 ? e : width, d, rng));
        m.inference.push_back(AttentionInferenceParams::init(width, config.heads, rng));
      }
      break;
    }
  }

  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  m.output_weights = uniform_parameter({width, config.num_classes}, bound, rng);
  m.output_bias = Tensor::zeros({config.num_classes}, true);
  return m;
}

ForwardResult Model::forward(const EncodedExample& example,
                             const ForwardOptions& options) const {
  const auto variant = config_.variant;
  if (example.review.empty()) {
    throw EmptySequenceError("forward: empty review");
  }
  if (example.summary.empty() && reads_summary(variant)) {
    throw EmptySequenceError("forward: empty summary for variant " +
                             std::string(variant_name(variant)));
  }
  if (example.label >= config_.num_classes) {
    throw IndexError("forward: label " + std::to_string(example.label) +
                     " out of range");
  }
  const bool dropping = options.training && config_.dropout > 0.0;
  if (dropping && options.rng == nullptr) {
    throw ConfigError("training forward with dropout needs an RNG");
  }
  auto drop = [&](const Tensor& x) {
    return dropping ? dropout(x, config_.dropout, true, *options.rng) : x;
  };
  auto embed = [&](const std::vector<int>& ids) {
    return drop(embedding_lookup(embeddings, ids));
  };
  auto encode = [&](const BiLstmEncoder& enc, const Tensor& x) {
    return drop(encode_sequence(enc, x));
  };

  ForwardResult result;
  result.auxiliary_loss = Tensor::scalar(0.0);
  auto record = [&](const char* kind, const char* source, std::size_t layer,
                    std::size_t head, const Tensor& weights) {
    if (options.record_trace) result.trace.add(kind, source, layer, head, weights);
  };

  Tensor pooled;
  switch (variant) {
    case ModelVariant::kReviewOnlyPool:
      pooled = average_pool(encode(review_encoders[0], embed(example.review)));
      break;
    case ModelVariant::kSummaryOnlyPool:
      pooled = average_pool(encode(summary_encoders[0], embed(example.summary)));
      break;
    case ModelVariant::kReviewOnlySelfAttn:
    case ModelVariant::kSummaryOnlySelfAttn: {
      const bool review = variant == ModelVariant::kReviewOnlySelfAttn;
      Tensor states = review ? encode(review_encoders[0], embed(example.review))
                             : encode(summary_encoders[0], embed(example.summary));
      auto attended = revsum::self_attention(self_attention[0], states);
      record("self", review ? "review" : "summary", 0, 0, attended.weights);
      pooled = average_pool(attended.context);
      break;
    }
    case ModelVariant::kSeparatePool: {
      Tensor review = encode(review_encoders[0], embed(example.review));
      Tensor summary = encode(summary_encoders[0], embed(example.summary));
      pooled = average_pool(concat(review, summary, 0));
      break;
    }
    case ModelVariant::kSeparateSelfAttn: {
      Tensor review = encode(review_encoders[0], embed(example.review));
      Tensor summary = encode(summary_encoders[0], embed(example.summary));
      auto rw = revsum::self_attention(self_attention[0], review);
      auto sw = revsum::self_attention(self_attention[1], summary);
      record("self", "review", 0, 0, rw.weights);
      record("self", "summary", 0, 0, sw.weights);
      pooled = average_pool(concat(rw.context, sw.context, 0));
      break;
    }
    case ModelVariant::kJointPool:
      pooled = average_pool(
          encode(*joint_encoder, embed(concat_ids(example.review, example.summary))));
      break;
    case ModelVariant::kJointSelfAttn:
    case ModelVariant::kJointHard: {
      Tensor states =
          encode(*joint_encoder, embed(concat_ids(example.review, example.summary)));
      auto attended = revsum::self_attention(self_attention[0], states);
      const bool hard = variant == ModelVariant::kJointHard;
      record(hard ? "hard" : "self", "joint", 0, 0, attended.weights);
      if (hard) {
        std::vector<std::uint8_t> labels(example.overlap);
        labels.resize(example.review.size() + example.summary.size(), 0);
        result.auxiliary_loss =
            hard_attention_loss(row(attended.weights, 0), labels);
      }
      pooled = average_pool(attended.context);
      break;
    }
    case ModelVariant::kJointCoAttnReview:
    case ModelVariant::kJointCoAttnSummary:
    case ModelVariant::kJointCoAttnConcat: {
      Tensor review = encode(review_encoders[0], embed(example.review));
      Tensor summary = encode(summary_encoders[0], embed(example.summary));
      auto co = revsum::co_attention(*co_attention, review, summary);
      record("co_review", "summary", 0, 0, co.review_weights);
      record("co_summary", "review", 0, 0, co.summary_weights);
      if (variant == ModelVariant::kJointCoAttnReview) {
        pooled = average_pool(co.review);
      } else if (variant == ModelVariant::kJointCoAttnSummary) {
        pooled = average_pool(co.summary);
      } else {
        pooled = average_pool(concat(co.review, co.summary, 0));
      }
      break;
    }
    case ModelVariant::kReviewCentric:
    case ModelVariant::kSummaryCentric: {
      const bool review_side = variant == ModelVariant::kReviewCentric;
      const auto& context_ids = review_side ? example.summary : example.review;
      const auto& stacked_ids = review_side ? example.review : example.summary;
      const auto& context_enc = review_side ? summary_encoders[0] : review_encoders[0];
      const auto& stacked = review_side ? review_encoders : summary_encoders;
      Tensor context = average_pool(encode(context_enc, embed(context_ids)));
      Tensor states = embed(stacked_ids);
      for (std::size_t l = 0; l < stacked.size(); ++l) {
        auto refined =
            attention_inference(inference[l], encode(stacked[l], states), context);
        for (std::size_t h = 0; h < refined.head_weights.size(); ++h) {
          record("inference", review_side ? "review" : "summary", l, h,
                 refined.head_weights[h]);
        }
        states = refined.output;
      }
      pooled = average_pool(states);
      break;
    }
  }

  result.probs = softmax(add(matmul(pooled, output_weights), output_bias), 0);
  return result;
}

int argmax_rating(const Tensor& probs) {
  auto p = probs.values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return static_cast<int>(best) + 1;
}

int Model::predict(const EncodedExample& example) const {
  NoGradGuard no_grad;
  ForwardOptions options;
  options.record_trace = false;
  return argmax_rating(forward(example, options).probs);
}

ParameterList Model::parameters() const {
  ParameterList out;
  out.push_back({"embeddings", embeddings});
  for (std::size_t i = 0; i < review_encoders.size(); ++i) {
    review_encoders[i].collect(out, "review_encoder" + std::to_string(i));
  }
  for (std::size_t i = 0; i < summary_encoders.size(); ++i) {
    summary_encoders[i].collect(out, "summary_encoder" + std::to_string(i));
  }
  if (joint_encoder) joint_encoder->collect(out, "joint_encoder");
  for (std::size_t i = 0; i < self_attention.size(); ++i) {
    self_attention[i].collect(out, "self_attention" + std::to_string(i));
  }
  if (co_attention) co_attention->collect(out, "co_attention");
  for (std::size_t i = 0; i < inference.size(); ++i) {
    inference[i].collect(out, "inference" + std::to_string(i));
  }
  out.push_back({"output.weights", output_weights});
  out.push_back({"output.bias", output_bias});
  return out;
}

std::vector<Tensor> Model::trainable() const {
  std::vector<Tensor> out;
  for (auto& p : parameters()) {
    if (p.tensor.requires_grad()) out.push_back(p.tensor);
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.size();
  return n;
}

Model Model::clone() const {
  Model copy = *this;
  visit_tensors(copy, [](Tensor& t) {
    const bool grad = t.requires_grad();
    t = Tensor::from(t.shape(), std::vector<double>(t.values().begin(), t.values().end()),
                     grad);
  });
  return copy;
}

void Model::copy_values_from(const Model& other) {
  const auto source = other.parameters();
  auto target = parameters();
  if (source.size() != target.size()) {
    throw ShapeError("copy_values_from: models have different structure");
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (source[i].name != target[i].name ||
        source[i].tensor.shape() != target[i].tensor.shape()) {
      throw ShapeError("copy_values_from: parameter '" + target[i].name +
                       "' does not match '" + source[i].name + "'");
    }
    auto src = source[i].tensor.values();
    std::copy(src.begin(), src.end(), target[i].tensor.mutable_values().begin());
  }
}

void Model::set_embeddings(const Tensor& table) {
  if (table.shape() != embeddings.shape()) {
    throw ShapeError("set_embeddings: expected " +
                     shape_string(embeddings.shape()) + ", got " +
                     shape_string(table.shape()));
  }
  auto src = table.values();
  std::copy(src.begin(), src.end(), embeddings.mutable_values().begin());
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  io::write_u32(out, kCheckpointVersion);
  io::write_string(out, model_config_to_json(model.config()));
  io::write_u64(out, vocab.size());
  for (const auto& token : vocab.tokens()) io::write_string(out, token);
  const auto params = model.parameters();
  io::write_u64(out, params.size());
  for (const auto& p : params) {
    io::write_string(out, p.name);
    io::write_tensor(out, p.tensor);
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(std::begin(magic), std::end(magic), kCheckpointMagic)) {
    throw FormatError(path.string() + " is not a checkpoint");
  }
  if (io::read_u32(in) != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version");
  }
  const ModelConfig config = parse_model_config(io::read_string(in));
  const auto vocab_count = io::read_u64(in);
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < vocab_count; ++i) tokens.push_back(io::read_string(in));
  Vocabulary vocab = Vocabulary::from_tokens(std::move(tokens));
  if (vocab.size() != config.vocab_size) {
    throw FormatError("checkpoint vocabulary size does not match its config");
  }

  Model model = Model::build(config, 0);
  std::map<std::string, Tensor> stored;
  const auto count = io::read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = io::read_string(in);
    stored.emplace(std::move(name), io::read_tensor(in));
  }
  for (auto& p : model.parameters()) {
    auto it = stored.find(p.name);
    if (it == stored.end()) {
      throw FormatError("checkpoint is missing parameter '" + p.name + "'");
    }
    if (it->second.shape() != p.tensor.shape()) {
      throw FormatError("checkpoint parameter '" + p.name + "' has shape " +
                        shape_string(it->second.shape()) + ", expected " +
                        shape_string(p.tensor.shape()));
    }
    auto src = it->second.values();
    std::copy(src.begin(), src.end(), p.tensor.mutable_values().begin());
  }
  if (stored.size() != model.parameters().size()) {
    throw FormatError("checkpoint holds unexpected parameters");
  }
  return {std::move(model), std::move(vocab)};
}

}  // namespace revsum
