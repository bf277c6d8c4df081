#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "tape.hpp"
#include "tensor.hpp"

namespace mtlb {

// One trainable tensor plus its optimizer state. Frozen parameters are staged
// on the tape like any other (their gradients may exist) but the optimizer
// never updates them.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor moment1;
    Tensor moment2;
    int64_t step_count = 0;
    bool frozen = false;

    explicit Parameter(std::string n, Tensor v)
        : name(std::move(n)),
          value(std::move(v)),
          moment1(Tensor::zeros(value.shape)),
          moment2(Tensor::zeros(value.shape)) {}
};

// Ordered, name-addressed parameter collection. Groups are name prefixes
// ("enc." for the encoder, "dec.MOR24." for one head, ...).
class ParamStore {
   public:
    Parameter& add(const std::string& name, Tensor value);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    std::vector<std::unique_ptr<Parameter>>& all() { return params_; }
    const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
    size_t size() const { return params_.size(); }

    void set_frozen(const std::string& prefix, bool frozen);
    // FNV hash over the raw value bytes of parameters under prefix.
    uint64_t checksum(const std::string& prefix = "") const;
    void reset_optimizer_state();

   private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, size_t> index_;
};

// Tape bindings for one forward/backward pass.
struct ParamBinding {
    Parameter* param;
    Var var;
};

class ParamBindings {
   public:
    // needs_grad=false stages parameters for inference: no backward closures
    // are recorded anywhere downstream.
    ParamBindings(Tape& tape, ParamStore& store, bool needs_grad = true);
    Var var_of(const Parameter& p) const;
    Var var_of(const std::string& name) const;
    // Gradient of a parameter after backward(); zeros if unreached.
    Tensor grad_of(const Parameter& p) const;
    const std::vector<ParamBinding>& bindings() const { return bindings_; }

   private:
    Tape* tape_;
    std::vector<ParamBinding> bindings_;
    std::unordered_map<const Parameter*, int> index_;
};

// Checkpoint format: magic "MTLB1", u32 count, then per parameter
// (name, u32 rank, dims, raw little-endian f64 values). Round-trips bit-exact.
std::vector<uint8_t> serialize_params(const ParamStore& store);
void deserialize_params(ParamStore& store, const std::vector<uint8_t>& bytes);
void save_checkpoint(const ParamStore& store, const std::string& path);
void load_checkpoint(ParamStore& store, const std::string& path);

}  // namespace mtlb
