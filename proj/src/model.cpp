#include "model.hpp"

#include <cmath>

#include "common.hpp"

namespace mtlb {

std::string encoder_kind_name(EncoderKind k) {
    switch (k) {
        case EncoderKind::LinearConcat: return "linear";
        case EncoderKind::Gru: return "gru";
        case EncoderKind::Transformer: return "transformer";
    }
    throw UsageError("bad encoder kind");
}

EncoderKind encoder_kind_from_name(const std::string& s) {
    if (s == "linear") return EncoderKind::LinearConcat;
    if (s == "gru") return EncoderKind::Gru;
    if (s == "transformer") return EncoderKind::Transformer;
    throw ConfigError("unknown architecture: " + s);
}

std::string pooling_name(Pooling p) {
    switch (p) {
        case Pooling::Last: return "last";
        case Pooling::Max: return "max";
        case Pooling::Avg: return "avg";
        case Pooling::Cls: return "cls";
    }
    throw UsageError("bad pooling");
}

Pooling pooling_from_name(const std::string& s) {
    if (s == "last") return Pooling::Last;
    if (s == "max") return Pooling::Max;
    if (s == "avg") return Pooling::Avg;
    if (s == "cls") return Pooling::Cls;
    throw ConfigError("unknown pooling: " + s);
}

void EncoderConfig::validate() const {
    if (window_hours < 12 || window_hours > 168)
        throw ConfigError("input window must be in [12,168]h, got " + std::to_string(window_hours));
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (embed_dim < 1 || hidden_dim < 1 || num_layers < 1) throw ConfigError("dims must be positive");
    if (pooling == Pooling::Cls && kind != EncoderKind::Transformer)
        throw ConfigError("cls pooling requires the transformer encoder");
    if (kind == EncoderKind::Transformer) {
        if (transformer.num_heads < 1 || embed_dim % transformer.num_heads != 0)
            throw ConfigError("transformer embed dim " + std::to_string(embed_dim) +
                              " not divisible by num heads " + std::to_string(transformer.num_heads));
        if (transformer.use_cls != (pooling == Pooling::Cls))
            throw ConfigError("transformer use_cls and pooling disagree");
    }
    if (gru_fc.num_layers < 0 || (gru_fc.num_layers > 0 && gru_fc.base_size < 1))
        throw ConfigError("bad fully connected stack configuration");
}

int EncoderConfig::gru_fc_size(int layer) const {
    double sz = gru_fc.base_size * std::pow(gru_fc.growth, layer);
    return std::max(1, static_cast<int>(std::lround(sz)));
}

int EncoderConfig::encoded_dim() const {
    switch (kind) {
        case EncoderKind::LinearConcat: return window_hours * embed_dim;
        case EncoderKind::Gru: {
            if (gru_fc.num_layers > 0) return gru_fc_size(gru_fc.num_layers - 1);
            return hidden_dim * (bidirectional ? 2 : 1);
        }
        case EncoderKind::Transformer: return embed_dim;
    }
    throw UsageError("bad encoder kind");
}

EncoderConfig EncoderConfig::preset(const std::string& name) {
    EncoderConfig c;
    if (name == "gru-paper") {
        c.kind = EncoderKind::Gru;
        c.embed_dim = 233;
        c.hidden_dim = 126;
        c.num_layers = 2;
        c.bidirectional = false;
        c.pooling = Pooling::Last;
        c.dropout = 0.42;
        c.window_hours = 48;
    } else if (name == "linear-paper") {
        c.kind = EncoderKind::LinearConcat;
        c.embed_dim = 140;
        c.hidden_dim = 140;
        c.num_layers = 1;
        c.pooling = Pooling::Avg;
        c.dropout = 0.22;
        c.window_hours = 48;
    } else if (name == "transformer-paper") {
        c.kind = EncoderKind::Transformer;
        c.embed_dim = 72;
        c.hidden_dim = 72;
        c.num_layers = 1;
        c.pooling = Pooling::Cls;
        c.dropout = 0.18;
        c.window_hours = 48;
        c.transformer.num_heads = 12;
        c.transformer.intermediate_dim = 55;
        c.transformer.use_cls = true;
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    c.validate();
    return c;
}

// ---- batch input -----------------------------------------------------------

BatchInput BatchInput::make(int batch, int window) {
    BatchInput in;
    in.batch = batch;
    in.window = window;
    in.data.assign(static_cast<size_t>(batch) * window * kInputChannels, 0.0);
    return in;
}

void BatchInput::fill_sample(int b, const PatientRecord& rec, int end_hour) {
    fill_input_window(rec, end_hour, window, row(b, 0));
}

Tensor BatchInput::hour_matrix(int t) const {
    Tensor m = Tensor::zeros({batch, kInputChannels});
    for (int b = 0; b < batch; ++b) {
        const double* src =
            &data[(static_cast<size_t>(b) * window + static_cast<size_t>(t)) * kInputChannels];
        std::copy(src, src + kInputChannels, &m.data[static_cast<size_t>(b) * kInputChannels]);
    }
    return m;
}

Tensor BatchInput::sample_matrix(int b) const {
    Tensor m = Tensor::zeros({window, kInputChannels});
    const double* src = &data[static_cast<size_t>(b) * window * kInputChannels];
    std::copy(src, src + static_cast<size_t>(window) * kInputChannels, m.data.begin());
    return m;
}

// ---- model ------------------------------------------------------------------

namespace {
int gru_directions(const EncoderConfig& c) { return c.bidirectional ? 2 : 1; }
}  // namespace

Model::Model(EncoderConfig cfg, std::vector<TaskSpec> suite, uint64_t init_seed)
    : cfg_(std::move(cfg)), suite_(std::move(suite)) {
    cfg_.validate();
    if (suite_.empty()) throw ConfigError("model needs a nonempty task suite");
    int E = cfg_.embed_dim;
    params_.add("enc.embed.W", Tensor::zeros({kInputChannels, E}));
    params_.add("enc.embed.b", Tensor::zeros({1, E}));

    if (cfg_.kind == EncoderKind::Gru) {
        int H = cfg_.hidden_dim;
        for (int l = 0; l < cfg_.num_layers; ++l) {
            int in_dim = l == 0 ? E : H * gru_directions(cfg_);
            for (int d = 0; d < gru_directions(cfg_); ++d) {
                std::string p = "enc.gru.l" + std::to_string(l) + (d == 0 ? ".f." : ".b.");
                for (const char* gate : {"z", "r", "h"}) {
                    params_.add(p + "W" + gate, Tensor::zeros({in_dim, H}));
                    params_.add(p + "U" + gate, Tensor::zeros({H, H}));
                    params_.add(p + "b" + gate, Tensor::zeros({1, H}));
                }
            }
        }
        int in_dim = H * gru_directions(cfg_);
        for (int i = 0; i < cfg_.gru_fc.num_layers; ++i) {
            int out_dim = cfg_.gru_fc_size(i);
            params_.add("enc.fc" + std::to_string(i) + ".W", Tensor::zeros({in_dim, out_dim}));
            params_.add("enc.fc" + std::to_string(i) + ".b", Tensor::zeros({1, out_dim}));
            in_dim = out_dim;
        }
    } else if (cfg_.kind == EncoderKind::Transformer) {
        int heads = cfg_.transformer.num_heads;
        int dh = E / heads;
        int I = cfg_.transformer.intermediate_dim;
        if (cfg_.transformer.use_cls) params_.add("enc.tf.cls", Tensor::zeros({1, E}));
        for (int l = 0; l < cfg_.num_layers; ++l) {
            std::string p = "enc.tf.l" + std::to_string(l) + ".";
            for (int h = 0; h < heads; ++h) {
                std::string hp = p + "h" + std::to_string(h) + ".";
                params_.add(hp + "Wq", Tensor::zeros({E, dh}));
                params_.add(hp + "Wk", Tensor::zeros({E, dh}));
                params_.add(hp + "Wv", Tensor::zeros({E, dh}));
            }
            params_.add(p + "Wo", Tensor::zeros({E, E}));
            params_.add(p + "bo", Tensor::zeros({1, E}));
            params_.add(p + "ln1.gamma", Tensor::zeros({1, E}));
            params_.add(p + "ln1.beta", Tensor::zeros({1, E}));
            params_.add(p + "ff.W1", Tensor::zeros({E, I}));
            params_.add(p + "ff.b1", Tensor::zeros({1, I}));
            params_.add(p + "ff.W2", Tensor::zeros({I, E}));
            params_.add(p + "ff.b2", Tensor::zeros({1, E}));
            params_.add(p + "ln2.gamma", Tensor::zeros({1, E}));
            params_.add(p + "ln2.beta", Tensor::zeros({1, E}));
        }
    }

    int enc = cfg_.encoded_dim();
    for (const auto& t : suite_) {
        std::string p = "dec." + t.id + ".";
        if (t.label_type == LabelType::SeqMulticlass) {
            fts_hidden_ = std::min(enc, kFtsMaxHidden);
            int Hd = fts_hidden_;
            if (enc != Hd) {
                params_.add(p + "bridge.W", Tensor::zeros({enc, Hd}));
                params_.add(p + "bridge.b", Tensor::zeros({1, Hd}));
            }
            params_.add(p + "embed", Tensor::zeros({kStartToken + 1, Hd}));
            for (const char* gate : {"i", "f", "g", "o"}) {
                params_.add(p + std::string("W") + gate, Tensor::zeros({Hd, Hd}));
                params_.add(p + std::string("U") + gate, Tensor::zeros({Hd, Hd}));
                params_.add(p + std::string("b") + gate, Tensor::zeros({1, Hd}));
            }
            params_.add(p + "out.W", Tensor::zeros({Hd, kSeqVocab}));
            params_.add(p + "out.b", Tensor::zeros({1, kSeqVocab}));
        } else {
            params_.add(p + "W", Tensor::zeros({enc, t.decoder_width()}));
            params_.add(p + "b", Tensor::zeros({1, t.decoder_width()}));
        }
    }
    init_group("", init_seed);
}

const TaskSpec& Model::task(const std::string& id) const {
    for (const auto& t : suite_)
        if (t.id == id) return t;
    throw UsageError("task not in suite: " + id);
}

void Model::init_group(const std::string& prefix, uint64_t seed) {
    for (auto& p : params_.all()) {
        if (p->name.rfind(prefix, 0) != 0) continue;
        Rng rng(mix_seed(seed, "init:" + p->name));
        const std::string& n = p->name;
        auto ends_with = [&](const char* suffix) {
            size_t l = std::strlen(suffix);
            return n.size() >= l && n.compare(n.size() - l, l, suffix) == 0;
        };
        if (ends_with(".gamma")) {
            std::fill(p->value.data.begin(), p->value.data.end(), 1.0);
        } else if (ends_with(".beta") || ends_with(".b") || ends_with(".b1") || ends_with(".b2") ||
                   ends_with(".bz") || ends_with(".br") || ends_with(".bh") || ends_with(".bi") ||
                   ends_with(".bf") || ends_with(".bg") || ends_with(".bo")) {
            std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
        } else {
            int fan_in = ends_with(".cls") ? p->value.cols() : p->value.rows();
            double a = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
            for (double& v : p->value.data) v = rng.uniform(-a, a);
        }
        p->moment1 = Tensor::zeros(p->value.shape);
        p->moment2 = Tensor::zeros(p->value.shape);
        p->step_count = 0;
    }
}

void Model::init_decoder(const std::string& task_id, uint64_t seed) {
    task(task_id);  // existence check
    init_group("dec." + task_id + ".", seed);
}

// ---- encoders -----------------------------------------------------------------

namespace {
Var affine(Tape& tape, const ParamBindings& pb, Var x, const std::string& w, const std::string& b) {
    return add_rowvec(matmul(x, pb.var_of(w)), pb.var_of(b));
}
}  // namespace

Var Model::encode(Tape& tape, const ParamBindings& pb, const BatchInput& in, bool train,
                  Rng& rng) const {
    if (in.window != cfg_.window_hours)
        throw UsageError("batch window " + std::to_string(in.window) + " != configured " +
                         std::to_string(cfg_.window_hours));
    switch (cfg_.kind) {
        case EncoderKind::Gru: return encode_gru(tape, pb, in, train, rng);
        case EncoderKind::LinearConcat: return encode_linear(tape, pb, in, train, rng);
        case EncoderKind::Transformer: return encode_transformer(tape, pb, in, train, rng);
    }
    throw UsageError("bad encoder kind");
}

Var Model::encode_gru(Tape& tape, const ParamBindings& pb, const BatchInput& in, bool train,
                      Rng& rng) const {
    int T = in.window, B = in.batch, H = cfg_.hidden_dim;
    std::vector<Var> seq(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        Var x = tape.leaf(in.hour_matrix(t));
        seq[static_cast<size_t>(t)] = affine(tape, pb, x, "enc.embed.W", "enc.embed.b");
    }

    Var zeros_h = tape.leaf(Tensor::zeros({B, H}));
    std::vector<Var> last_states;
    for (int l = 0; l < cfg_.num_layers; ++l) {
        std::vector<std::vector<Var>> dir_out;
        for (int d = 0; d < gru_directions(cfg_); ++d) {
            std::string p = "enc.gru.l" + std::to_string(l) + (d == 0 ? ".f." : ".b.");
            Var Wz = pb.var_of(p + "Wz"), Uz = pb.var_of(p + "Uz"), bz = pb.var_of(p + "bz");
            Var Wr = pb.var_of(p + "Wr"), Ur = pb.var_of(p + "Ur"), br = pb.var_of(p + "br");
            Var Wh = pb.var_of(p + "Wh"), Uh = pb.var_of(p + "Uh"), bh = pb.var_of(p + "bh");
            Var h = zeros_h;
            std::vector<Var> outs(static_cast<size_t>(T));
            for (int step = 0; step < T; ++step) {
                int t = d == 0 ? step : T - 1 - step;
                Var x = seq[static_cast<size_t>(t)];
                Var z = sigmoid(add_rowvec(add(matmul(x, Wz), matmul(h, Uz)), bz));
                Var r = sigmoid(add_rowvec(add(matmul(x, Wr), matmul(h, Ur)), br));
                Var cand = tanh_op(add_rowvec(add(matmul(x, Wh), matmul(mul(r, h), Uh)), bh));
                // h' = z*h + (1-z)*cand
                h = add(mul(z, h), mul(add_const(scale(z, -1.0), 1.0), cand));
                outs[static_cast<size_t>(t)] = h;
            }
            last_states.push_back(h);
            dir_out.push_back(std::move(outs));
        }
        for (int t = 0; t < T; ++t) {
            Var o = gru_directions(cfg_) == 1
                        ? dir_out[0][static_cast<size_t>(t)]
                        : concat_cols({dir_out[0][static_cast<size_t>(t)], dir_out[1][static_cast<size_t>(t)]});
            if (train && l + 1 < cfg_.num_layers) o = dropout(o, cfg_.dropout, train, rng);
            seq[static_cast<size_t>(t)] = o;
        }
    }

    Var pooled;
    switch (cfg_.pooling) {
        case Pooling::Last: {
            size_t n = last_states.size();
            if (gru_directions(cfg_) == 1)
                pooled = last_states[n - 1];
            else
                pooled = concat_cols({last_states[n - 2], last_states[n - 1]});
            break;
        }
        case Pooling::Max: {
            pooled = seq[0];
            for (int t = 1; t < T; ++t) pooled = emax(pooled, seq[static_cast<size_t>(t)]);
            break;
        }
        case Pooling::Avg: {
            pooled = seq[0];
            for (int t = 1; t < T; ++t) pooled = add(pooled, seq[static_cast<size_t>(t)]);
            pooled = scale(pooled, 1.0 / T);
            break;
        }
        case Pooling::Cls:
            throw UsageError("cls pooling is transformer-only");
    }
    pooled = dropout(pooled, cfg_.dropout, train, rng);
    for (int i = 0; i < cfg_.gru_fc.num_layers; ++i) {
        std::string p = "enc.fc" + std::to_string(i) + ".";
        pooled = relu(affine(tape, pb, pooled, p + "W", p + "b"));
    }
    return pooled;
}

Var Model::encode_linear(Tape& tape, const ParamBindings& pb, const BatchInput& in, bool train,
                         Rng& rng) const {
    int T = in.window;
    std::vector<Var> parts(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        Var x = tape.leaf(in.hour_matrix(t));
        parts[static_cast<size_t>(t)] = affine(tape, pb, x, "enc.embed.W", "enc.embed.b");
    }
    Var flat = concat_cols(parts);
    return dropout(flat, cfg_.dropout, train, rng);
}

Var Model::encode_transformer(Tape& tape, const ParamBindings& pb, const BatchInput& in, bool train,
                              Rng& rng) const {
    int T = in.window, E = cfg_.embed_dim;
    int heads = cfg_.transformer.num_heads;
    double att_scale = 1.0 / std::sqrt(static_cast<double>(E / heads));
    std::vector<Var> pooled_rows(static_cast<size_t>(in.batch));
    for (int b = 0; b < in.batch; ++b) {
        Var x = tape.leaf(in.sample_matrix(b));
        Var h = affine(tape, pb, x, "enc.embed.W", "enc.embed.b");  // [T x E]
        if (cfg_.transformer.use_cls) h = concat_rows({pb.var_of("enc.tf.cls"), h});
        for (int l = 0; l < cfg_.num_layers; ++l) {
            std::string p = "enc.tf.l" + std::to_string(l) + ".";
            std::vector<Var> head_out(static_cast<size_t>(heads));
            for (int hd = 0; hd < heads; ++hd) {
                std::string hp = p + "h" + std::to_string(hd) + ".";
                Var q = matmul(h, pb.var_of(hp + "Wq"));
                Var k = matmul(h, pb.var_of(hp + "Wk"));
                Var v = matmul(h, pb.var_of(hp + "Wv"));
                Var att = softmax_rows(scale(matmul(q, transpose(k)), att_scale));
                head_out[static_cast<size_t>(hd)] = matmul(att, v);
            }
            Var att_all = concat_cols(head_out);
            Var proj = affine(tape, pb, att_all, p + "Wo", p + "bo");
            proj = dropout(proj, cfg_.dropout, train, rng);
            h = layer_norm_rows(add(h, proj), pb.var_of(p + "ln1.gamma"), pb.var_of(p + "ln1.beta"));
            Var ff = relu(affine(tape, pb, h, p + "ff.W1", p + "ff.b1"));
            ff = dropout(ff, cfg_.dropout, train, rng);
            ff = affine(tape, pb, ff, p + "ff.W2", p + "ff.b2");
            h = layer_norm_rows(add(h, ff), pb.var_of(p + "ln2.gamma"), pb.var_of(p + "ln2.beta"));
        }
        Var out;
        if (cfg_.transformer.use_cls) {
            out = slice_rows(h, 0, 1);
        } else if (cfg_.pooling == Pooling::Avg) {
            out = slice_rows(h, 0, 1);
            for (int t = 1; t < T; ++t) out = add(out, slice_rows(h, t, 1));
            out = scale(out, 1.0 / T);
        } else if (cfg_.pooling == Pooling::Max) {
            out = slice_rows(h, 0, 1);
            for (int t = 1; t < T; ++t) out = emax(out, slice_rows(h, t, 1));
        } else {
            throw ConfigError("transformer pooling must be cls, avg or max");
        }
        pooled_rows[static_cast<size_t>(b)] = out;
    }
    return stack_rows(pooled_rows);
}

Tensor Model::encode_record(const PatientRecord& rec, int end_hour) const {
    BatchInput in = BatchInput::make(1, cfg_.window_hours);
    in.fill_sample(0, rec, end_hour);
    Tape tape;
    // const_cast is confined here: inference bindings never mutate parameters.
    ParamBindings pb(tape, const_cast<ParamStore&>(params_), false);
    Rng rng(0);
    Var enc = encode(tape, pb, in, false, rng);
    Tensor out = Tensor::zeros({cfg_.encoded_dim()});
    const Tensor& v = tape.val(enc);
    std::copy(v.data.begin(), v.data.end(), out.data.begin());
    return out;
}

Var Model::head_logits(Tape& tape, const ParamBindings& pb, const std::string& task_id,
                       Var encoded) const {
    const TaskSpec& t = task(task_id);
    if (t.label_type == LabelType::SeqMulticlass)
        throw UsageError("sequential task uses fts_step_logits, not an affine head");
    return affine(tape, pb, encoded, "dec." + task_id + ".W", "dec." + task_id + ".b");
}

Var Model::fts_step_logits(Tape& tape, const ParamBindings& pb, Var encoded_row,
                           const std::vector<int>& gold) const {
    if (gold.empty()) throw UsageError("fts decoding needs at least the EOS step");
    std::string p;
    for (const auto& t : suite_)
        if (t.label_type == LabelType::SeqMulticlass) p = "dec." + t.id + ".";
    if (p.empty()) throw UsageError("no sequential task in suite");
    int Hd = fts_hidden_;

    Var h;
    if (cfg_.encoded_dim() == Hd)
        h = encoded_row;
    else
        h = affine(tape, pb, encoded_row, p + "bridge.W", p + "bridge.b");
    Var c = tape.leaf(Tensor::zeros({1, Hd}));
    Var emb = pb.var_of(p + "embed");
    Var Wi = pb.var_of(p + "Wi"), Ui = pb.var_of(p + "Ui"), bi = pb.var_of(p + "bi");
    Var Wf = pb.var_of(p + "Wf"), Uf = pb.var_of(p + "Uf"), bf = pb.var_of(p + "bf");
    Var Wg = pb.var_of(p + "Wg"), Ug = pb.var_of(p + "Ug"), bg = pb.var_of(p + "bg");
    Var Wo = pb.var_of(p + "Wo"), Uo = pb.var_of(p + "Uo"), bo = pb.var_of(p + "bo");

    std::vector<Var> logit_rows;
    logit_rows.reserve(gold.size());
    for (size_t k = 0; k < gold.size(); ++k) {
        int tok_in = k == 0 ? kStartToken : gold[k - 1];
        if (tok_in < 0 || tok_in > kStartToken)
            throw DataError("treatment token outside vocabulary: " + std::to_string(tok_in));
        Var x = slice_rows(emb, tok_in, 1);
        Var i = sigmoid(add_rowvec(add(matmul(x, Wi), matmul(h, Ui)), bi));
        Var f = sigmoid(add_rowvec(add(matmul(x, Wf), matmul(h, Uf)), bf));
        Var g = tanh_op(add_rowvec(add(matmul(x, Wg), matmul(h, Ug)), bg));
        Var o = sigmoid(add_rowvec(add(matmul(x, Wo), matmul(h, Uo)), bo));
        c = add(mul(f, c), mul(i, g));
        h = mul(o, tanh_op(c));
        logit_rows.push_back(affine(tape, pb, h, p + "out.W", p + "out.b"));
    }
    return concat_rows(logit_rows);
}

}  // namespace mtlb
