#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "common.hpp"

namespace mtlb {

double TrainConfig::lr_at(int epoch) const {
    int steps = lr_step > 0 ? epoch / lr_step : 0;
    return learning_rate * std::pow(lr_decay, steps);
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr decay must be in (0,1]");
    if (lr_step < 1) throw ConfigError("lr step must be >= 1");
    if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
    if (regression_loss_weight < 0.0) throw ConfigError("regression loss weight must be >= 0");
    if (dropout >= 1.0) throw ConfigError("dropout must be < 1");
}

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::ST: return "ST";
        case Regime::MT: return "MT";
        case Regime::PretrainOmit: return "OMIT";
        case Regime::FTD: return "FTD";
        case Regime::FTF: return "FTF";
    }
    throw UsageError("bad regime");
}

Regime regime_from_name(const std::string& s) {
    if (s == "ST") return Regime::ST;
    if (s == "MT") return Regime::MT;
    if (s == "OMIT") return Regime::PretrainOmit;
    if (s == "FTD") return Regime::FTD;
    if (s == "FTF") return Regime::FTF;
    throw ConfigError("unknown regime: " + s);
}

// ---- optimizer -----------------------------------------------------------------

void adam_step(ParamStore& store, const std::vector<Tensor>& grads, double lr, double weight_decay,
               const std::function<bool(const Parameter&)>& active) {
    if (grads.size() != store.size()) throw UsageError("adam_step: gradient count mismatch");
    auto& params = store.all();
    for (size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (p.frozen || !active(p)) continue;
        const Tensor& g = grads[i];
        if (!g.same_shape(p.value)) throw UsageError("adam_step: gradient shape mismatch for " + p.name);
        for (double v : g.data)
            if (std::isnan(v)) throw NumericError("NaN gradient in " + p.name);
        p.step_count += 1;
        double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(p.step_count));
        double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(p.step_count));
        for (size_t k = 0; k < p.value.data.size(); ++k) {
            double gk = g.data[k];
            p.moment1.data[k] = kAdamBeta1 * p.moment1.data[k] + (1.0 - kAdamBeta1) * gk;
            p.moment2.data[k] = kAdamBeta2 * p.moment2.data[k] + (1.0 - kAdamBeta2) * gk * gk;
            double m_hat = p.moment1.data[k] / bc1;
            double v_hat = p.moment2.data[k] / bc2;
            p.value.data[k] -= lr * (m_hat / (std::sqrt(v_hat) + kAdamEps) + weight_decay * p.value.data[k]);
        }
    }
}

double clip_gradients(std::vector<Tensor>& grads, const ParamStore& store, double max_norm,
                      const std::function<bool(const Parameter&)>& active) {
    auto& params = store.all();
    double sq = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i]->frozen || !active(*params[i])) continue;
        for (double v : grads[i].data) sq += v * v;
    }
    double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        double s = max_norm / norm;
        for (size_t i = 0; i < params.size(); ++i) {
            if (params[i]->frozen || !active(*params[i])) continue;
            for (double& v : grads[i].data) v *= s;
        }
    }
    return norm;
}

// ---- batch construction -----------------------------------------------------------

TrainBatch build_train_batch(const CohortDataset& ds, const std::vector<uint32_t>& patients,
                             const std::vector<int>& window_ends, int window_hours,
                             const std::vector<TaskSpec>& tasks) {
    if (patients.size() != window_ends.size()) throw UsageError("batch: ends/patients mismatch");
    int B = static_cast<int>(patients.size());
    TrainBatch batch;
    batch.record_idx = patients;
    batch.input = BatchInput::make(B, window_hours);
    for (int b = 0; b < B; ++b)
        batch.input.fill_sample(b, ds.records[patients[static_cast<size_t>(b)]],
                                window_ends[static_cast<size_t>(b)]);

    for (const auto& t : tasks) {
        BatchTargets tg;
        int width = t.decoder_width();
        switch (t.label_type) {
            case LabelType::Binary: {
                tg.target = Tensor::zeros({B, 1});
                tg.mask = Tensor::zeros({B, 1});
                for (int b = 0; b < B; ++b) {
                    const auto& rec = ds.records[patients[static_cast<size_t>(b)]];
                    int anchor = window_ends[static_cast<size_t>(b)];
                    if (t.is_rolling_event()) {
                        RollingEvent ev = t.category == TaskCategory::MOR ? RollingEvent::Death
                                          : t.category == TaskCategory::CMO ? RollingEvent::CmoOrder
                                                                            : RollingEvent::DnrOrder;
                        TriLabel l = label_rolling_event(rec, ev, anchor, t.gap_hours, t.horizon_hours);
                        if (l != TriLabel::Masked) {
                            tg.mask.at(b, 0) = 1.0;
                            tg.target.at(b, 0) = l == TriLabel::Positive ? 1.0 : 0.0;
                        }
                    } else if (t.category == TaskCategory::LOS) {
                        StaticLabels st = label_static(rec);
                        if (st.valid) {
                            tg.mask.at(b, 0) = 1.0;
                            tg.target.at(b, 0) = st.long_stay ? 1.0 : 0.0;
                        }
                    } else {  // REA
                        tg.mask.at(b, 0) = 1.0;
                        tg.target.at(b, 0) = label_readmission(rec) ? 1.0 : 0.0;
                    }
                }
                break;
            }
            case LabelType::Multilabel: {
                tg.target = Tensor::zeros({B, width});
                tg.mask = Tensor::zeros({B, width});
                for (int b = 0; b < B; ++b) {
                    const auto& rec = ds.records[patients[static_cast<size_t>(b)]];
                    int anchor = window_ends[static_cast<size_t>(b)];
                    if (t.category == TaskCategory::ICD) {
                        StaticLabels st = label_static(rec);
                        if (!st.valid) continue;
                        for (int k = 0; k < width; ++k) {
                            tg.mask.at(b, k) = 1.0;
                            tg.target.at(b, k) = (st.icd_bits >> k) & 1 ? 1.0 : 0.0;
                        }
                    } else {  // WBM
                        WbmLabels w = label_wbm(rec, std::min(anchor, rec.stay_hours));
                        if (!w.valid) continue;
                        for (int k = 0; k < width; ++k) {
                            tg.mask.at(b, k) = 1.0;
                            tg.target.at(b, k) = w.measured_next[static_cast<size_t>(k)] ? 1.0 : 0.0;
                        }
                    }
                }
                break;
            }
            case LabelType::Multiclass: {
                tg.classes.assign(static_cast<size_t>(B), 0);
                tg.row_mask = Tensor::zeros({B});
                for (int b = 0; b < B; ++b) {
                    const auto& rec = ds.records[patients[static_cast<size_t>(b)]];
                    int anchor = window_ends[static_cast<size_t>(b)];
                    if (t.category == TaskCategory::DIS) {
                        auto cls = label_discharge(rec, anchor, t.gap_hours, t.horizon_hours);
                        if (cls) {
                            tg.classes[static_cast<size_t>(b)] = *cls;
                            tg.row_mask.data[static_cast<size_t>(b)] = 1.0;
                        }
                    } else {  // ACU
                        StaticLabels st = label_static(rec);
                        if (st.valid) {
                            tg.classes[static_cast<size_t>(b)] = st.acuity;
                            tg.row_mask.data[static_cast<size_t>(b)] = 1.0;
                        }
                    }
                }
                break;
            }
            case LabelType::Regression: {
                tg.target = Tensor::zeros({B, width});
                tg.mask = Tensor::zeros({B, width});
                for (int b = 0; b < B; ++b) {
                    const auto& rec = ds.records[patients[static_cast<size_t>(b)]];
                    int anchor = window_ends[static_cast<size_t>(b)];
                    WbmLabels w = label_wbm(rec, std::min(anchor, rec.stay_hours));
                    if (!w.valid) continue;
                    for (int k = 0; k < width; ++k) {
                        if (!w.measured_next[static_cast<size_t>(k)]) continue;
                        tg.mask.at(b, k) = 1.0;
                        tg.target.at(b, k) = w.values_next[static_cast<size_t>(k)];
                    }
                }
                break;
            }
            case LabelType::SeqMulticlass: {
                tg.seqs.resize(static_cast<size_t>(B));
                for (int b = 0; b < B; ++b) {
                    const auto& rec = ds.records[patients[static_cast<size_t>(b)]];
                    tg.seqs[static_cast<size_t>(b)] = label_fts(rec, window_ends[static_cast<size_t>(b)]);
                }
                break;
            }
        }
        batch.targets[t.id] = std::move(tg);
    }
    return batch;
}

Var total_loss(Tape& tape, const Model& model, const ParamBindings& pb, Var encoded,
               const TrainBatch& batch, const std::vector<std::string>& active_task_ids,
               double regression_loss_weight) {
    if (active_task_ids.empty()) throw UsageError("total_loss: empty active task set");
    std::vector<Var> terms;
    for (const std::string& id : active_task_ids) {
        const TaskSpec& t = model.task(id);
        auto it = batch.targets.find(id);
        if (it == batch.targets.end()) throw UsageError("total_loss: no targets for " + id);
        const BatchTargets& tg = it->second;
        Var term;
        switch (t.label_type) {
            case LabelType::Binary:
            case LabelType::Multilabel:
                term = bce_with_logits_loss(model.head_logits(tape, pb, id, encoded), tg.target, tg.mask);
                break;
            case LabelType::Multiclass:
                term = ce_with_logits_loss(model.head_logits(tape, pb, id, encoded), tg.classes,
                                           tg.row_mask);
                break;
            case LabelType::Regression: {
                Var l = mse_loss(model.head_logits(tape, pb, id, encoded), tg.target, tg.mask);
                term = scale(l, regression_loss_weight);
                break;
            }
            case LabelType::SeqMulticlass: {
                std::vector<Var> rows;
                std::vector<int> classes;
                for (size_t b = 0; b < tg.seqs.size(); ++b) {
                    Var enc_row = slice_rows(encoded, static_cast<int>(b), 1);
                    rows.push_back(model.fts_step_logits(tape, pb, enc_row, tg.seqs[b]));
                    for (int tok : tg.seqs[b]) classes.push_back(tok);
                }
                Var logits = concat_rows(rows);
                Tensor ones = Tensor::full({static_cast<int>(classes.size())}, 1.0);
                term = ce_with_logits_loss(logits, classes, ones);
                break;
            }
        }
        terms.push_back(term);
    }
    return add_scalars(terms);
}

// ---- evaluation ------------------------------------------------------------------

MacroAuroc TaskEval::macro() const { return macro_auroc(scores, labels); }

double TaskEval::score_or_analog() const {
    if (category == TaskCategory::NEXTREG)
        return regression_analog(r_squared(reg_pred, reg_target, reg_mask));
    auto m = macro();
    return m.macro ? *m.macro : 0.5;  // fully degenerate task scores as chance
}

namespace {

// Plain (tape-free) affine for evaluation-time decoder heads.
Tensor dense_affine(const Tensor& X, const Tensor& W, const Tensor& b) {
    int n = X.rows(), in = X.cols(), out = W.cols();
    Tensor Y = Tensor::zeros({n, out});
    for (int r = 0; r < n; ++r) {
        const double* x = &X.data[static_cast<size_t>(r) * in];
        double* y = &Y.data[static_cast<size_t>(r) * out];
        for (int c = 0; c < out; ++c) y[c] = b.data[static_cast<size_t>(c)];
        for (int k = 0; k < in; ++k) {
            double xv = x[k];
            if (xv == 0.0) continue;
            const double* w = &W.data[static_cast<size_t>(k) * out];
            for (int c = 0; c < out; ++c) y[c] += xv * w[c];
        }
    }
    return Y;
}

void softmax_inplace(double* row, int n) {
    double mx = row[0];
    for (int c = 1; c < n; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < n; ++c) {
        row[c] = std::exp(row[c] - mx);
        sum += row[c];
    }
    for (int c = 0; c < n; ++c) row[c] /= sum;
}

struct SampleRef {
    uint32_t rec;
    int anchor;
    int win;
};

}  // namespace

std::map<std::string, TaskEval> evaluate(const Model& model, const CohortDataset& ds,
                                         const std::vector<uint32_t>& patient_indices,
                                         const std::vector<TaskSpec>& tasks,
                                         const EvalOptions& opts) {
    std::vector<uint32_t> pts = patient_indices;
    if (opts.max_patients > 0 && static_cast<int>(pts.size()) > opts.max_patients) {
        Rng rng(mix_seed(opts.anchor_seed, "eval-subset"));
        rng.shuffle(pts);
        pts.resize(static_cast<size_t>(opts.max_patients));
        std::sort(pts.begin(), pts.end());
    }
    int W = model.config().window_hours;

    // Unique input windows across tasks; tasks sharing (temporal, gap) share
    // anchors by construction, so the encoder runs once per distinct window.
    std::vector<std::pair<uint32_t, int>> windows;  // (record index, window end)
    std::map<std::pair<uint32_t, int>, int> window_index;
    std::map<std::string, std::vector<SampleRef>> task_samples;
    std::map<std::string, TaskEval> evals;

    for (const auto& t : tasks) {
        TaskEval te;
        te.task_id = t.id;
        te.category = t.category;
        evals[t.id] = std::move(te);
    }

    for (uint32_t pi : pts) {
        const PatientRecord& rec = ds.records[pi];
        for (const auto& t : tasks) {
            auto anchors = sample_eval_points(rec, t, opts.anchor_seed);
            if (anchors.empty()) {
                evals[t.id].skipped_patients += 1;
                continue;
            }
            for (int a : anchors) {
                int end = t.temporal == Temporal::Terminal ? rec.stay_hours : a;
                auto key = std::make_pair(pi, end);
                auto it = window_index.find(key);
                int wi;
                if (it == window_index.end()) {
                    wi = static_cast<int>(windows.size());
                    windows.push_back(key);
                    window_index[key] = wi;
                } else {
                    wi = it->second;
                }
                task_samples[t.id].push_back(SampleRef{pi, a, wi});
            }
        }
    }

    // Encode every distinct window once, in batches.
    int enc_dim = model.config().encoded_dim();
    Tensor encoded = Tensor::zeros({static_cast<int>(windows.size()), enc_dim});
    {
        auto& store = const_cast<ParamStore&>(model.params());
        Rng norng(0);
        for (size_t start = 0; start < windows.size(); start += static_cast<size_t>(opts.batch)) {
            size_t count = std::min(static_cast<size_t>(opts.batch), windows.size() - start);
            BatchInput in = BatchInput::make(static_cast<int>(count), W);
            for (size_t i = 0; i < count; ++i)
                in.fill_sample(static_cast<int>(i), ds.records[windows[start + i].first],
                               windows[start + i].second);
            Tape tape;
            ParamBindings pb(tape, store, false);
            Var out = model.encode(tape, pb, in, false, norng);
            const Tensor& v = tape.val(out);
            std::copy(v.data.begin(), v.data.end(),
                      encoded.data.begin() + static_cast<int64_t>(start) * enc_dim);
        }
    }

    auto gather_rows = [&](const std::vector<SampleRef>& refs) {
        Tensor X = Tensor::zeros({static_cast<int>(refs.size()), enc_dim});
        for (size_t i = 0; i < refs.size(); ++i)
            std::copy(encoded.data.begin() + static_cast<int64_t>(refs[i].win) * enc_dim,
                      encoded.data.begin() + static_cast<int64_t>(refs[i].win + 1) * enc_dim,
                      X.data.begin() + static_cast<int64_t>(i) * enc_dim);
        return X;
    };

    for (const auto& t : tasks) {
        TaskEval& te = evals[t.id];
        const auto& refs = task_samples[t.id];
        if (refs.empty()) continue;

        if (t.label_type == LabelType::SeqMulticlass) {
            te.scores.assign(kSeqVocab, {});
            te.labels.assign(kSeqVocab, {});
            auto& store = const_cast<ParamStore&>(model.params());
            for (const auto& ref : refs) {
                const PatientRecord& rec = ds.records[ref.rec];
                std::vector<int> gold = label_fts(rec, ref.anchor);
                Tape tape;
                ParamBindings pb(tape, store, false);
                Var enc_row = tape.leaf(Tensor::matrix(
                    1, enc_dim,
                    {encoded.data.begin() + static_cast<int64_t>(ref.win) * enc_dim,
                     encoded.data.begin() + static_cast<int64_t>(ref.win + 1) * enc_dim}));
                Var logits = model.fts_step_logits(tape, pb, enc_row, gold);
                Tensor probs = tape.val(logits);
                for (int r = 0; r < probs.rows(); ++r) {
                    softmax_inplace(&probs.data[static_cast<size_t>(r) * kSeqVocab], kSeqVocab);
                    for (int c = 0; c < kSeqVocab; ++c) {
                        te.scores[static_cast<size_t>(c)].push_back(probs.at(r, c));
                        te.labels[static_cast<size_t>(c)].push_back(gold[static_cast<size_t>(r)] == c ? 1 : 0);
                    }
                    te.row_sex.push_back(rec.sex);
                }
            }
            continue;
        }

        Tensor X = gather_rows(refs);
        const Tensor& Wd = model.params().get("dec." + t.id + ".W").value;
        const Tensor& bd = model.params().get("dec." + t.id + ".b").value;
        Tensor logits = dense_affine(X, Wd, bd);
        int width = t.decoder_width();

        switch (t.label_type) {
            case LabelType::Binary: {
                te.scores.assign(1, {});
                te.labels.assign(1, {});
                for (size_t i = 0; i < refs.size(); ++i) {
                    const PatientRecord& rec = ds.records[refs[i].rec];
                    int label;
                    if (t.is_rolling_event()) {
                        RollingEvent ev = t.category == TaskCategory::MOR ? RollingEvent::Death
                                          : t.category == TaskCategory::CMO ? RollingEvent::CmoOrder
                                                                            : RollingEvent::DnrOrder;
                        TriLabel l =
                            label_rolling_event(rec, ev, refs[i].anchor, t.gap_hours, t.horizon_hours);
                        if (l == TriLabel::Masked) continue;
                        label = l == TriLabel::Positive ? 1 : 0;
                    } else if (t.category == TaskCategory::LOS) {
                        StaticLabels st = label_static(rec);
                        if (!st.valid) continue;
                        label = st.long_stay ? 1 : 0;
                    } else {
                        label = label_readmission(rec) ? 1 : 0;
                    }
                    double s = 1.0 / (1.0 + std::exp(-logits.at(static_cast<int>(i), 0)));
                    te.scores[0].push_back(s);
                    te.labels[0].push_back(label);
                    te.row_sex.push_back(rec.sex);
                }
                break;
            }
            case LabelType::Multilabel: {
                te.scores.assign(static_cast<size_t>(width), {});
                te.labels.assign(static_cast<size_t>(width), {});
                for (size_t i = 0; i < refs.size(); ++i) {
                    const PatientRecord& rec = ds.records[refs[i].rec];
                    if (t.category == TaskCategory::ICD) {
                        StaticLabels st = label_static(rec);
                        if (!st.valid) continue;
                        for (int k = 0; k < width; ++k) {
                            double s = 1.0 / (1.0 + std::exp(-logits.at(static_cast<int>(i), k)));
                            te.scores[static_cast<size_t>(k)].push_back(s);
                            te.labels[static_cast<size_t>(k)].push_back((st.icd_bits >> k) & 1 ? 1 : 0);
                        }
                    } else {
                        WbmLabels w = label_wbm(rec, refs[i].anchor);
                        if (!w.valid) continue;
                        for (int k = 0; k < width; ++k) {
                            double s = 1.0 / (1.0 + std::exp(-logits.at(static_cast<int>(i), k)));
                            te.scores[static_cast<size_t>(k)].push_back(s);
                            te.labels[static_cast<size_t>(k)].push_back(
                                w.measured_next[static_cast<size_t>(k)] ? 1 : 0);
                        }
                    }
                    te.row_sex.push_back(rec.sex);
                }
                break;
            }
            case LabelType::Multiclass: {
                te.scores.assign(static_cast<size_t>(width), {});
                te.labels.assign(static_cast<size_t>(width), {});
                for (size_t i = 0; i < refs.size(); ++i) {
                    const PatientRecord& rec = ds.records[refs[i].rec];
                    int cls;
                    if (t.category == TaskCategory::DIS) {
                        auto l = label_discharge(rec, refs[i].anchor, t.gap_hours, t.horizon_hours);
                        if (!l) continue;
                        cls = *l;
                    } else {
                        StaticLabels st = label_static(rec);
                        if (!st.valid) continue;
                        cls = st.acuity;
                    }
                    softmax_inplace(&logits.data[i * static_cast<size_t>(width)], width);
                    for (int k = 0; k < width; ++k) {
                        te.scores[static_cast<size_t>(k)].push_back(logits.at(static_cast<int>(i), k));
                        te.labels[static_cast<size_t>(k)].push_back(cls == k ? 1 : 0);
                    }
                    te.row_sex.push_back(rec.sex);
                }
                break;
            }
            case LabelType::Regression: {
                for (size_t i = 0; i < refs.size(); ++i) {
                    const PatientRecord& rec = ds.records[refs[i].rec];
                    WbmLabels w = label_wbm(rec, refs[i].anchor);
                    if (!w.valid) continue;
                    for (int k = 0; k < width; ++k) {
                        te.reg_pred.push_back(logits.at(static_cast<int>(i), k));
                        te.reg_target.push_back(w.values_next[static_cast<size_t>(k)]);
                        te.reg_mask.push_back(w.measured_next[static_cast<size_t>(k)] ? 1.0 : 0.0);
                    }
                    te.row_sex.push_back(rec.sex);
                }
                break;
            }
            case LabelType::SeqMulticlass:
                break;  // handled above
        }
    }
    return evals;
}

double category_score(const std::map<std::string, TaskEval>& evals, TaskCategory cat) {
    double sum = 0.0;
    int n = 0;
    for (const auto& [id, te] : evals) {
        if (te.category != cat) continue;
        sum += te.score_or_analog();
        ++n;
    }
    if (n == 0) throw UsageError("category_score: no evaluated tasks in category " + category_name(cat));
    return sum / n;
}

// ---- regime runner ------------------------------------------------------------------

int select_epoch(const std::vector<double>& tune_curve, bool final_epoch) {
    if (tune_curve.empty()) throw UsageError("select_epoch: empty curve");
    if (final_epoch) return static_cast<int>(tune_curve.size()) - 1;
    int best = 0;
    for (int e = 1; e < static_cast<int>(tune_curve.size()); ++e)
        if (tune_curve[static_cast<size_t>(e)] > tune_curve[static_cast<size_t>(best)]) best = e;
    return best;
}

RunResult run_regime(const RunSpec& spec, const CohortDataset& ds) {
    EncoderConfig enc_cfg = spec.encoder;
    if (spec.train.dropout >= 0.0) enc_cfg.dropout = spec.train.dropout;
    enc_cfg.validate();
    spec.train.validate();
    if (spec.suite.empty()) throw ConfigError("run: empty suite");

    bool targeted = spec.regime.kind != Regime::MT;
    if (targeted &&
        std::find(spec.suite.begin(), spec.suite.end(), spec.regime.task) == spec.suite.end())
        throw ConfigError("target task " + category_name(spec.regime.task) + " not in suite");

    // Active categories for the loss.
    std::vector<TaskCategory> active_cats;
    switch (spec.regime.kind) {
        case Regime::ST:
        case Regime::FTD:
        case Regime::FTF: active_cats = {spec.regime.task}; break;
        case Regime::MT: active_cats = spec.suite; break;
        case Regime::PretrainOmit:
            for (TaskCategory c : spec.suite)
                if (c != spec.regime.task) active_cats.push_back(c);
            if (active_cats.empty())
                throw ConfigError("task-omitted pretraining needs at least one remaining task");
            break;
    }

    // ST trains a fresh single-task model; every other regime carries the full
    // suite (the omitted task keeps an untouched decoder by contract).
    std::vector<TaskCategory> model_cats =
        spec.regime.kind == Regime::ST ? std::vector<TaskCategory>{spec.regime.task} : spec.suite;
    Model model(enc_cfg, suite_for(model_cats), mix_seed(spec.train.seed, "model-init"));

    if (spec.regime.kind == Regime::FTD || spec.regime.kind == Regime::FTF) {
        if (spec.regime.pretrain_checkpoint.empty())
            throw ConfigError("fine-tuning requires a pretraining checkpoint");
        load_checkpoint(model.params(), spec.regime.pretrain_checkpoint);
        for (const auto& t : model.suite())
            if (t.category == spec.regime.task)
                model.init_decoder(t.id, mix_seed(spec.train.seed, "finetune-init:" + t.id));
        if (spec.regime.kind == Regime::FTD) model.params().set_frozen("enc.", true);
    }

    std::vector<uint32_t> train_idx = ds.indices_of(Split::Train);
    if (spec.subsample.mode != SubsampleSpec::Mode::None) {
        if (spec.regime.kind == Regime::MT || spec.regime.kind == Regime::PretrainOmit)
            throw ConfigError("subsampling applies to fine-tuning/ST data, not pretraining");
        train_idx = subsample_train(ds, train_idx, spec.subsample);
    }
    std::vector<uint32_t> tune_idx = ds.indices_of(Split::Tune);
    std::vector<uint32_t> test_idx = ds.indices_of(Split::Test);
    if (train_idx.empty() || tune_idx.empty() || test_idx.empty())
        throw DataError("dataset has an empty split");

    std::vector<TaskSpec> active_specs = suite_for(active_cats);
    std::vector<std::string> active_ids;
    for (const auto& t : active_specs) active_ids.push_back(t.id);
    auto is_active = [&](const Parameter& p) {
        if (p.name.rfind("enc.", 0) == 0) return true;
        for (const auto& id : active_ids)
            if (p.name.rfind("dec." + id + ".", 0) == 0) return true;
        return false;
    };

    uint64_t anchor_seed = mix_seed(ds.info.seed, "eval-anchors");
    EvalOptions tune_opts{anchor_seed, spec.train.tune_eval_patients, spec.train.eval_batch};

    RunResult result;
    result.active_tasks = active_ids;
    std::vector<uint8_t> best_snapshot;
    double best_score = -1.0;

    for (int epoch = 0; epoch < spec.train.epochs; ++epoch) {
        std::vector<uint32_t> order = train_idx;
        Rng shuffle_rng(mix_seed(spec.train.seed, "shuffle", static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double lr = spec.train.lr_at(epoch);

        for (size_t start = 0, bi = 0; start < order.size();
             start += static_cast<size_t>(spec.train.batch_size), ++bi) {
            size_t count = std::min(static_cast<size_t>(spec.train.batch_size), order.size() - start);
            std::vector<uint32_t> ids(order.begin() + static_cast<int64_t>(start),
                                      order.begin() + static_cast<int64_t>(start + count));
            std::vector<int> ends(count);
            for (size_t i = 0; i < count; ++i) {
                Rng wrng(mix_seed(spec.train.seed, "window", static_cast<uint64_t>(epoch),
                                  ds.records[ids[i]].id));
                ends[i] = sample_window_end(ds.records[ids[i]].stay_hours, enc_cfg.window_hours, wrng);
            }
            TrainBatch batch = build_train_batch(ds, ids, ends, enc_cfg.window_hours, active_specs);

            Tape tape;
            ParamBindings pb(tape, model.params());
            Rng drng(mix_seed(spec.train.seed, "dropout", static_cast<uint64_t>(epoch), bi));
            Var encoded = model.encode(tape, pb, batch.input, true, drng);
            Var total = total_loss(tape, model, pb, encoded, batch, active_ids,
                                   spec.train.regression_loss_weight);
            double loss_value = tape.val(total).scalar_value();
            if (!std::isfinite(loss_value))
                throw NumericError("non-finite loss (" + std::to_string(loss_value) + ") at epoch " +
                                   std::to_string(epoch) + " batch " + std::to_string(bi) + " under " +
                                   regime_name(spec.regime.kind));
            tape.backward(total);

            std::vector<Tensor> grads;
            grads.reserve(model.params().size());
            for (const auto& binding : pb.bindings()) grads.push_back(tape.grad_of(binding.var));
            clip_gradients(grads, model.params(), spec.train.grad_clip_norm, is_active);
            adam_step(model.params(), grads, lr, spec.train.weight_decay, is_active);
        }

        auto tune_evals = evaluate(model, ds, tune_idx, active_specs, tune_opts);
        double score = 0.0;
        if (spec.regime.kind == Regime::MT || spec.regime.kind == Regime::PretrainOmit) {
            for (TaskCategory c : active_cats) score += category_score(tune_evals, c);
            score /= static_cast<double>(active_cats.size());
        } else {
            score = category_score(tune_evals, spec.regime.task);
        }
        result.tune_curve.push_back(score);
        if (score > best_score) {
            best_score = score;
            best_snapshot = serialize_params(model.params());
        }
    }

    result.selected_epoch = select_epoch(result.tune_curve, spec.train.select_final_epoch);
    result.selected_tune_score = result.tune_curve[static_cast<size_t>(result.selected_epoch)];
    if (!spec.train.select_final_epoch) deserialize_params(model.params(), best_snapshot);

    EvalOptions test_opts{anchor_seed, 0, spec.train.eval_batch};
    result.test_eval = evaluate(model, ds, test_idx, active_specs, test_opts);

    if (!spec.checkpoint_out.empty()) {
        save_checkpoint(model.params(), spec.checkpoint_out);
        result.checkpoint_path = spec.checkpoint_out;
    }
    return result;
}

}  // namespace mtlb
