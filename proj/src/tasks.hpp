#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "data.hpp"

namespace mtlb {

// Task categories. The ten reported categories plus the next-hour regression
// task, which is trained but never reported.
enum class TaskCategory { MOR, CMO, DNR, DIS, ICD, LOS, REA, ACU, WBM, FTS, NEXTREG };
enum class Temporal { Rolling, Static, Terminal, Autoregressive };
enum class LabelType { Binary, Multilabel, Multiclass, SeqMulticlass, Regression };

std::string category_name(TaskCategory c);
TaskCategory category_from_name(const std::string& name);
// The ten categories that appear in reports, in table order.
const std::vector<TaskCategory>& reported_categories();
const std::vector<TaskCategory>& all_categories();

struct TaskSpec {
    std::string id;  // "MOR24", "DIS48", "ICD", ...
    TaskCategory category;
    Temporal temporal;
    int gap_hours = 0;      // rolling: 2 or 6; static: 12
    int horizon_hours = 0;  // rolling: 24 or 48; autoregressive: 1; -1 = none
    LabelType label_type;
    std::vector<std::string> label_space;

    int decoder_width() const;
    bool is_rolling_event() const {
        return category == TaskCategory::MOR || category == TaskCategory::CMO ||
               category == TaskCategory::DNR;
    }
};

// All 15 specific tasks (11 categories; rolling categories carry a 24h and a
// 48h variant, Next Timepoint carries classification and regression).
const std::vector<TaskSpec>& full_suite();
std::vector<TaskSpec> suite_for(const std::vector<TaskCategory>& cats);
const TaskSpec& task_by_id(const std::string& id);

// ---- label derivation ---------------------------------------------------------
// Anchors use the convention "t hours observed": an anchor at hour t stands at
// the end of hour t-1 with hours [0, t) in view; the model input is the window
// ending at t. Event hours share the same axis, so an event at hour e is
// imminent-positive iff t + gap < e <= t + gap + horizon.

enum class TriLabel { Negative = 0, Positive = 1, Masked = 2 };
enum class RollingEvent { Death, CmoOrder, DnrOrder };

TriLabel label_rolling_event(const PatientRecord& rec, RollingEvent ev, int anchor, int gap,
                             int horizon);

// Discharge class index into discharge_table() (0 = No Discharge), or nullopt
// when the discharge falls inside the gap (masked, matching the event rule).
std::optional<int> label_discharge(const PatientRecord& rec, int anchor, int gap, int horizon);

struct StaticLabels {
    bool valid = false;  // stays of <= 24h + 12h gap carry no static labels
    uint32_t icd_bits = 0;
    bool long_stay = false;  // stay >= 3 days, boundary inclusive
    int acuity = -1;
};
StaticLabels label_static(const PatientRecord& rec);

// Positive iff a later ICU admission starts within 30 days, boundary inclusive.
bool label_readmission(const PatientRecord& rec);

struct WbmLabels {
    bool valid = false;
    std::vector<uint8_t> measured_next;  // kNumChannels bits
    std::vector<double> values_next;     // standardized values where measured
};
WbmLabels label_wbm(const PatientRecord& rec, int anchor);

// Deduplicated treatment-set token sequence over the remaining stay, EOS last.
std::vector<int> label_fts(const PatientRecord& rec, int anchor);

// ---- evaluation anchors ---------------------------------------------------------

// Rolling/autoregressive anchors require kMinHistoryHours of observed history;
// this also reproduces the "short stay yields fewer than 10 anchors" behavior.
inline constexpr int kMinHistoryHours = 12;
inline constexpr int kEvalPointsPerPatient = 10;
inline constexpr int kStaticAnchorHour = 24;
inline constexpr int kTerminalWindowHours = 48;

// Tasks sharing (temporal, gap) draw identical anchors for the same seed, so
// encoder activations can be cached across tasks at evaluation time.
uint64_t anchor_group(const TaskSpec& spec);
std::vector<int> valid_anchor_hours(const PatientRecord& rec, const TaskSpec& spec);
std::vector<int> sample_eval_points(const PatientRecord& rec, const TaskSpec& spec, uint64_t seed);

}  // namespace mtlb
