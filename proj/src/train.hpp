#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "data.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "tasks.hpp"

namespace mtlb {

struct TrainConfig {
    int epochs = 18;
    int batch_size = 254;
    double learning_rate = 0.001;
    double lr_decay = 1.0;  // multiplied in every lr_step epochs
    int lr_step = 1;
    double weight_decay = 0.0;
    double dropout = -1.0;  // >= 0 overrides the encoder config's dropout
    uint64_t seed = 1;
    double regression_loss_weight = 1.0;
    double grad_clip_norm = 5.0;  // global-norm clip; <= 0 disables
    int tune_eval_patients = 0;   // 0 = whole tune split each epoch
    int eval_batch = 128;
    bool select_final_epoch = false;  // default: best tune epoch, earliest on ties

    double lr_at(int epoch) const;
    void validate() const;
};

enum class Regime { ST, MT, PretrainOmit, FTD, FTF };
std::string regime_name(Regime r);
Regime regime_from_name(const std::string& s);

struct RegimeSpec {
    Regime kind = Regime::MT;
    TaskCategory task = TaskCategory::MOR;     // target task; ignored for MT
    std::string pretrain_checkpoint;           // required for FTD/FTF
};

// ---- optimizer ----------------------------------------------------------------

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One Adam step with decoupled weight decay. Gradients are aligned with
// store.all(); frozen parameters and parameters outside the active set are
// untouched (the omitted-task decoder must stay at initialization exactly).
void adam_step(ParamStore& store, const std::vector<Tensor>& grads, double lr, double weight_decay,
               const std::function<bool(const Parameter&)>& active);

// Global-norm gradient clipping over the active set; returns the pre-clip norm.
double clip_gradients(std::vector<Tensor>& grads, const ParamStore& store, double max_norm,
                      const std::function<bool(const Parameter&)>& active);

// ---- batch construction --------------------------------------------------------

struct BatchTargets {
    Tensor target;               // binary / multilabel / regression
    Tensor mask;
    std::vector<int> classes;    // multiclass
    Tensor row_mask;
    std::vector<std::vector<int>> seqs;  // sequential task gold (each ends with EOS)
};

struct TrainBatch {
    BatchInput input;
    std::vector<uint32_t> record_idx;
    std::map<std::string, BatchTargets> targets;  // by task id
};

TrainBatch build_train_batch(const CohortDataset& ds, const std::vector<uint32_t>& patients,
                             const std::vector<int>& window_ends, int window_hours,
                             const std::vector<TaskSpec>& tasks);

// Sum of per-task masked losses over the active tasks; the regression term is
// scaled by regression_loss_weight. Empty active set is a usage error.
Var total_loss(Tape& tape, const Model& model, const ParamBindings& pb, Var encoded,
               const TrainBatch& batch, const std::vector<std::string>& active_task_ids,
               double regression_loss_weight);

// ---- evaluation ----------------------------------------------------------------

struct TaskEval {
    std::string task_id;
    TaskCategory category = TaskCategory::MOR;
    // One column per label; rows are evaluation samples (or (sample, step)
    // pairs for the sequential task). Scores are probabilities.
    std::vector<std::vector<double>> scores;
    std::vector<std::vector<int>> labels;
    std::vector<uint8_t> row_sex;  // subgroup tag per row
    // Regression task only:
    std::vector<double> reg_pred, reg_target, reg_mask;
    int skipped_patients = 0;  // no valid anchor

    MacroAuroc macro() const;
    double score_or_analog() const;  // macro AUROC, or 2^(R^2-1) for regression
};

struct EvalOptions {
    uint64_t anchor_seed = 0;
    int max_patients = 0;  // 0 = all (subset choice is seeded and stable)
    int batch = 128;
};

std::map<std::string, TaskEval> evaluate(const Model& model, const CohortDataset& ds,
                                         const std::vector<uint32_t>& patient_indices,
                                         const std::vector<TaskSpec>& tasks,
                                         const EvalOptions& opts);

// Mean of per-task scores within one category ("category score").
double category_score(const std::map<std::string, TaskEval>& evals, TaskCategory cat);

// ---- regime runner ---------------------------------------------------------------

struct RunResult {
    std::map<std::string, TaskEval> test_eval;
    std::vector<double> tune_curve;
    int selected_epoch = -1;
    double selected_tune_score = 0.0;
    std::string checkpoint_path;
    std::vector<std::string> active_tasks;
};

struct RunSpec {
    RegimeSpec regime;
    std::vector<TaskCategory> suite;  // categories the model carries decoders for
    EncoderConfig encoder;
    TrainConfig train;
    SubsampleSpec subsample;          // ST/FTD/FTF only
    std::string checkpoint_out;       // empty = don't persist
};

RunResult run_regime(const RunSpec& spec, const CohortDataset& ds);

// Epoch selection over a tune curve: best score, earliest on ties; or the
// final epoch when requested.
int select_epoch(const std::vector<double>& tune_curve, bool final_epoch);

}  // namespace mtlb
