#pragma once

#include <cstddef>

namespace mdpt::model {

struct ModelConfig {
  size_t vocab_size = 512;
  size_t num_layers = 4;
  size_t hidden_dim = 64;
  size_t num_heads = 2;
  size_t max_seq_len = 128;
  size_t ff_dim = 256;

  // Group count for the layer-depth indexing: input embeddings are group 0,
  // transformer layers 1..L, the LM head (with its final layer norm) L+1.
  size_t num_groups() const { return num_layers + 2; }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

}  // namespace mdpt::model
