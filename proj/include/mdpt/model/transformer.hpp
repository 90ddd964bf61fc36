#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdpt/data/masking.hpp"
#include "mdpt/model/config.hpp"
#include "mdpt/numcore/tape.hpp"
#include "mdpt/numcore/tensor.hpp"

namespace mdpt::model {

enum class Pooling { kCls, kAvg };
Pooling parse_pooling(const std::string& s);

struct MlmOutput {
  numcore::Value loss;
  numcore::Value logits;  // (batch*seq, vocab)
};

// Pre-layer-norm transformer encoder with a masked-LM head.
//
// Parameter names encode the layer-group partition:
//   embed.*            group 0
//   layer.<i>.*        group 1+i
//   final.ln.*, head.* group L+1
class Transformer {
 public:
  Transformer(ModelConfig cfg, numcore::ParameterSet params);

  // Fresh model, BERT-family init: weights ~ N(0, 0.02), biases zero, layer
  // norm gains one.
  static Transformer init(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  numcore::ParameterSet& params() { return params_; }
  const numcore::ParameterSet& params() const { return params_; }

  // Records the encoder on `tape` and returns one activation per depth:
  // states[0] is the embedding output, states[l] the output of block l.
  std::vector<numcore::Value> encoder_states(numcore::Tape& tape,
                                             const std::vector<int32_t>& input_ids,
                                             size_t batch, size_t seq,
                                             const std::vector<uint8_t>& key_valid) const;

  // Mean cross-entropy over masked positions only.
  MlmOutput mlm_forward(numcore::Tape& tape, const data::MaskedBatch& batch) const;

  // One vector per segment from the last encoder layer: cls = position 0,
  // avg = mean over non-padding positions.
  std::vector<double> encode(const data::Segment& segment, Pooling pooling) const;

  // Hidden states of one segment at depth l in [0, num_layers], row per token.
  std::vector<std::vector<double>> hidden_states(const std::vector<int32_t>& tokens,
                                                 size_t layer) const;

  // Layer-group partition over parameter names.
  static int group_of_name(const std::string& param_name, size_t num_layers);
  int group_of(const std::string& param_name) const;
  std::vector<std::string> layer_parameters(int group) const;
  std::map<std::string, int> group_map() const;

  static numcore::ParameterSet init_params(const ModelConfig& cfg, uint64_t seed);

 private:
  ModelConfig cfg_;
  numcore::ParameterSet params_;
};

}  // namespace mdpt::model
