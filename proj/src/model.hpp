#pragma once

#include <string>
#include <vector>

#include "data.hpp"
#include "params.hpp"
#include "tasks.hpp"

namespace mtlb {

enum class EncoderKind { LinearConcat, Gru, Transformer };
enum class Pooling { Last, Max, Avg, Cls };

std::string encoder_kind_name(EncoderKind k);
EncoderKind encoder_kind_from_name(const std::string& s);
std::string pooling_name(Pooling p);
Pooling pooling_from_name(const std::string& s);

struct TransformerConfig {
    int num_heads = 12;
    int intermediate_dim = 55;
    bool use_cls = true;
};

// Optional fully connected stack after GRU pooling; layer i has
// round(base_size * growth^i) units.
struct GruFcConfig {
    int num_layers = 0;
    int base_size = 32;
    double growth = 1.0;
};

struct EncoderConfig {
    EncoderKind kind = EncoderKind::Gru;
    int embed_dim = 233;
    int hidden_dim = 126;
    int num_layers = 2;
    bool bidirectional = false;
    Pooling pooling = Pooling::Last;
    double dropout = 0.42;
    int window_hours = 48;
    TransformerConfig transformer;
    GruFcConfig gru_fc;

    void validate() const;
    int encoded_dim() const;
    int gru_fc_size(int layer) const;
    // Named presets for the tuned per-architecture configurations:
    // "gru-paper", "linear-paper", "transformer-paper".
    static EncoderConfig preset(const std::string& name);
};

// A batch of fixed-length input windows in the model input layout.
struct BatchInput {
    int batch = 0;
    int window = 0;
    std::vector<double> data;  // batch * window * kInputChannels

    static BatchInput make(int batch, int window);
    double* row(int b, int t) {
        return &data[(static_cast<size_t>(b) * window + static_cast<size_t>(t)) * kInputChannels];
    }
    void fill_sample(int b, const PatientRecord& rec, int end_hour);
    Tensor hour_matrix(int t) const;    // [batch x kInputChannels]
    Tensor sample_matrix(int b) const;  // [window x kInputChannels]
};

// Shared encoder plus one decoder head per task in the suite. Prediction for a
// task touches only the encoder and that task's decoder. Parameter groups:
// "enc." and "dec.<task-id>.".
class Model {
   public:
    Model(EncoderConfig cfg, std::vector<TaskSpec> suite, uint64_t init_seed);

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const EncoderConfig& config() const { return cfg_; }
    const std::vector<TaskSpec>& suite() const { return suite_; }
    const TaskSpec& task(const std::string& id) const;

    // Re-initializes one decoder's parameters (fresh head for fine-tuning).
    void init_decoder(const std::string& task_id, uint64_t seed);

    // Batched encoder forward: [batch x encoded_dim].
    Var encode(Tape& tape, const ParamBindings& pb, const BatchInput& in, bool train,
               Rng& dropout_rng) const;
    // Single-record convenience wrapper (evaluation mode).
    Tensor encode_record(const PatientRecord& rec, int end_hour) const;

    // Affine head logits [batch x width]; rejects the sequential task.
    Var head_logits(Tape& tape, const ParamBindings& pb, const std::string& task_id,
                    Var encoded) const;

    // Teacher-forced LSTM decoding for one sample: step k sees the start
    // sentinel followed by gold tokens < k; returns [steps x kSeqVocab] logits
    // where steps == gold.size() (gold ends with EOS).
    Var fts_step_logits(Tape& tape, const ParamBindings& pb, Var encoded_row,
                        const std::vector<int>& gold) const;

    int fts_hidden() const { return fts_hidden_; }

   private:
    void init_group(const std::string& prefix, uint64_t seed);
    Var encode_gru(Tape& tape, const ParamBindings& pb, const BatchInput& in, bool train,
                   Rng& rng) const;
    Var encode_linear(Tape& tape, const ParamBindings& pb, const BatchInput& in, bool train,
                      Rng& rng) const;
    Var encode_transformer(Tape& tape, const ParamBindings& pb, const BatchInput& in, bool train,
                           Rng& rng) const;

    EncoderConfig cfg_;
    std::vector<TaskSpec> suite_;
    ParamStore params_;
    int fts_hidden_ = 0;
};

// Maximum LSTM decoder width; wider encoders (the flattened linear encoding)
// go through the affine bridge instead of matching sizes.
inline constexpr int kFtsMaxHidden = 128;

}  // namespace mtlb
