#include "params.hpp"

#include "common.hpp"

namespace mtlb {

Parameter& ParamStore::add(const std::string& name, Tensor value) {
    if (contains(name)) throw UsageError("duplicate parameter: " + name);
    params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
    index_[name] = params_.size() - 1;
    return *params_.back();
}

Parameter& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter: " + name);
    return *params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter: " + name);
    return *params_[it->second];
}

void ParamStore::set_frozen(const std::string& prefix, bool frozen) {
    for (auto& p : params_)
        if (p->name.rfind(prefix, 0) == 0) p->frozen = frozen;
}

uint64_t ParamStore::checksum(const std::string& prefix) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params_) {
        if (p->name.rfind(prefix, 0) != 0) continue;
        h ^= fnv1a64(p->name);
        h *= 0x100000001b3ULL;
        h ^= fnv1a64(p->value.data.data(), p->value.data.size() * sizeof(double));
        h *= 0x100000001b3ULL;
    }
    return h;
}

void ParamStore::reset_optimizer_state() {
    for (auto& p : params_) {
        p->moment1 = Tensor::zeros(p->value.shape);
        p->moment2 = Tensor::zeros(p->value.shape);
        p->step_count = 0;
    }
}

ParamBindings::ParamBindings(Tape& tape, ParamStore& store, bool needs_grad) : tape_(&tape) {
    bindings_.reserve(store.size());
    for (auto& p : store.all()) {
        Var v = tape.leaf(p->value, needs_grad);
        index_[p.get()] = static_cast<int>(bindings_.size());
        bindings_.push_back(ParamBinding{p.get(), v});
    }
}

Var ParamBindings::var_of(const Parameter& p) const {
    auto it = index_.find(&p);
    if (it == index_.end()) throw UsageError("parameter not bound: " + p.name);
    return bindings_[static_cast<size_t>(it->second)].var;
}

Var ParamBindings::var_of(const std::string& name) const {
    for (const auto& b : bindings_)
        if (b.param->name == name) return b.var;
    throw UsageError("parameter not bound: " + name);
}

Tensor ParamBindings::grad_of(const Parameter& p) const {
    return tape_->grad_of(var_of(p));
}

static constexpr char kCheckpointMagic[5] = {'M', 'T', 'L', 'B', '1'};

std::vector<uint8_t> serialize_params(const ParamStore& store) {
    ByteWriter w;
    w.raw(kCheckpointMagic, 5);
    w.u32(static_cast<uint32_t>(store.size()));
    for (const auto& p : store.all()) {
        w.str(p->name);
        w.u32(static_cast<uint32_t>(p->value.shape.size()));
        for (int d : p->value.shape) w.u32(static_cast<uint32_t>(d));
        for (double v : p->value.data) w.f64(v);
    }
    return std::move(w.buf);
}

void deserialize_params(ParamStore& store, const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes.data(), bytes.size());
    char magic[5];
    r.raw(magic, 5);
    if (std::memcmp(magic, kCheckpointMagic, 5) != 0) throw DataError("bad checkpoint magic");
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        uint32_t rank = r.u32();
        std::vector<int> shape(rank);
        int64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(r.u32());
            numel *= shape[d];
        }
        std::vector<double> data(static_cast<size_t>(numel));
        for (auto& v : data) v = r.f64();
        Parameter& p = store.get(name);
        if (p.value.shape != shape)
            throw DataError("checkpoint shape mismatch for " + name + ": file " + shape_str(shape) +
                            " vs model " + p.value.shape_str());
        p.value.data = std::move(data);
    }
    if (r.remaining() != 0) throw DataError("trailing bytes in checkpoint");
}

void save_checkpoint(const ParamStore& store, const std::string& path) {
    write_file_atomic(path, serialize_params(store));
}

void load_checkpoint(ParamStore& store, const std::string& path) {
    deserialize_params(store, read_file(path));
}

}  // namespace mtlb
