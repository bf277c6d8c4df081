#include "tasks.hpp"

#include <algorithm>

#include "common.hpp"

namespace mtlb {

std::string category_name(TaskCategory c) {
    switch (c) {
        case TaskCategory::MOR: return "MOR";
        case TaskCategory::CMO: return "CMO";
        case TaskCategory::DNR: return "DNR";
        case TaskCategory::DIS: return "DIS";
        case TaskCategory::ICD: return "ICD";
        case TaskCategory::LOS: return "LOS";
        case TaskCategory::REA: return "REA";
        case TaskCategory::ACU: return "ACU";
        case TaskCategory::WBM: return "WBM";
        case TaskCategory::FTS: return "FTS";
        case TaskCategory::NEXTREG: return "NEXTREG";
    }
    throw UsageError("bad category");
}

TaskCategory category_from_name(const std::string& name) {
    for (TaskCategory c : all_categories())
        if (category_name(c) == name) return c;
    throw ConfigError("unknown task category: " + name);
}

const std::vector<TaskCategory>& reported_categories() {
    static const std::vector<TaskCategory> cats = {
        TaskCategory::MOR, TaskCategory::CMO, TaskCategory::DNR, TaskCategory::DIS,
        TaskCategory::ICD, TaskCategory::LOS, TaskCategory::REA, TaskCategory::ACU,
        TaskCategory::WBM, TaskCategory::FTS};
    return cats;
}

const std::vector<TaskCategory>& all_categories() {
    static const std::vector<TaskCategory> cats = {
        TaskCategory::MOR, TaskCategory::CMO, TaskCategory::DNR, TaskCategory::DIS,
        TaskCategory::ICD, TaskCategory::LOS, TaskCategory::REA, TaskCategory::ACU,
        TaskCategory::WBM, TaskCategory::FTS, TaskCategory::NEXTREG};
    return cats;
}

int TaskSpec::decoder_width() const {
    switch (label_type) {
        case LabelType::Binary: return 1;
        case LabelType::Multilabel:
        case LabelType::Multiclass:
        case LabelType::Regression: return static_cast<int>(label_space.size());
        case LabelType::SeqMulticlass: return kSeqVocab;
    }
    throw UsageError("bad label type");
}

namespace {

std::vector<std::string> discharge_names() {
    std::vector<std::string> v;
    for (const auto& d : discharge_table()) v.push_back(d.name);
    return v;
}
std::vector<std::string> icd_names() {
    std::vector<std::string> v;
    for (const auto& d : icd_table()) v.push_back(d.name);
    return v;
}
std::vector<std::string> acuity_names() {
    std::vector<std::string> v;
    for (const auto& d : acuity_table()) v.push_back(d.name);
    return v;
}
std::vector<std::string> channel_names() {
    std::vector<std::string> v;
    for (const auto& d : channel_table()) v.push_back(d.name);
    return v;
}
std::vector<std::string> token_names() {
    std::vector<std::string> v;
    for (int t = 0; t <= kEosToken; ++t) v.push_back(token_name(t));
    return v;
}

std::vector<TaskSpec> build_suite() {
    std::vector<TaskSpec> s;
    auto rolling = [&](const std::string& id, TaskCategory cat, int gap, int horizon,
                       LabelType type, std::vector<std::string> space) {
        s.push_back(TaskSpec{id, cat, Temporal::Rolling, gap, horizon, type, std::move(space)});
    };
    rolling("MOR24", TaskCategory::MOR, 2, 24, LabelType::Binary, {"mortality"});
    rolling("MOR48", TaskCategory::MOR, 6, 48, LabelType::Binary, {"mortality"});
    rolling("CMO24", TaskCategory::CMO, 2, 24, LabelType::Binary, {"cmo_added"});
    rolling("CMO48", TaskCategory::CMO, 6, 48, LabelType::Binary, {"cmo_added"});
    rolling("DNR24", TaskCategory::DNR, 2, 24, LabelType::Binary, {"dnr_added"});
    rolling("DNR48", TaskCategory::DNR, 6, 48, LabelType::Binary, {"dnr_added"});
    rolling("DIS24", TaskCategory::DIS, 2, 24, LabelType::Multiclass, discharge_names());
    rolling("DIS48", TaskCategory::DIS, 6, 48, LabelType::Multiclass, discharge_names());
    s.push_back(TaskSpec{"ICD", TaskCategory::ICD, Temporal::Static, 12, -1, LabelType::Multilabel,
                         icd_names()});
    s.push_back(TaskSpec{"LOS", TaskCategory::LOS, Temporal::Static, 12, -1, LabelType::Binary,
                         {"long_stay"}});
    s.push_back(TaskSpec{"REA", TaskCategory::REA, Temporal::Terminal, 0, -1, LabelType::Binary,
                         {"readmit_30d"}});
    s.push_back(TaskSpec{"ACU", TaskCategory::ACU, Temporal::Static, 12, -1, LabelType::Multiclass,
                         acuity_names()});
    s.push_back(TaskSpec{"WBM", TaskCategory::WBM, Temporal::Autoregressive, 0, 1,
                         LabelType::Multilabel, channel_names()});
    s.push_back(TaskSpec{"FTS", TaskCategory::FTS, Temporal::Autoregressive, 0, -1,
                         LabelType::SeqMulticlass, token_names()});
    s.push_back(TaskSpec{"NEXTREG", TaskCategory::NEXTREG, Temporal::Autoregressive, 0, 1,
                         LabelType::Regression, channel_names()});
    return s;
}

}  // namespace

const std::vector<TaskSpec>& full_suite() {
    static const std::vector<TaskSpec> suite = build_suite();
    return suite;
}

std::vector<TaskSpec> suite_for(const std::vector<TaskCategory>& cats) {
    std::vector<TaskSpec> out;
    for (const auto& t : full_suite())
        if (std::find(cats.begin(), cats.end(), t.category) != cats.end()) out.push_back(t);
    if (out.empty()) throw ConfigError("empty task suite");
    return out;
}

const TaskSpec& task_by_id(const std::string& id) {
    for (const auto& t : full_suite())
        if (t.id == id) return t;
    throw ConfigError("unknown task id: " + id);
}

// ---- labels ---------------------------------------------------------------------

namespace {
void check_anchor(const PatientRecord& rec, int anchor) {
    if (anchor < 1 || anchor > rec.stay_hours)
        throw UsageError("anchor " + std::to_string(anchor) + " outside stay of " +
                         std::to_string(rec.stay_hours) + "h");
}
}  // namespace

TriLabel label_rolling_event(const PatientRecord& rec, RollingEvent ev, int anchor, int gap,
                             int horizon) {
    check_anchor(rec, anchor);
    int e = -1;
    switch (ev) {
        case RollingEvent::Death: e = rec.outcomes.death_hour; break;
        case RollingEvent::CmoOrder: e = rec.outcomes.cmo_hour; break;
        case RollingEvent::DnrOrder: e = rec.outcomes.dnr_hour; break;
    }
    if (e < 0) return TriLabel::Negative;  // event-free stays are negatives
    if (e <= anchor) return TriLabel::Masked;  // order already exists / event at or before anchor
    if (e <= anchor + gap) return TriLabel::Masked;  // inside the gap
    if (e <= anchor + gap + horizon) return TriLabel::Positive;
    return TriLabel::Negative;
}

std::optional<int> label_discharge(const PatientRecord& rec, int anchor, int gap, int horizon) {
    check_anchor(rec, anchor);
    // In-ICU deaths never discharge; every anchor stays "No Discharge".
    if (rec.outcomes.death_hour >= 0) return 0;
    int d = rec.outcomes.discharge_hour;
    if (d <= anchor + gap) return std::nullopt;  // in gap (or at anchor): masked
    if (d <= anchor + gap + horizon) {
        if (rec.outcomes.discharge_location < 0 ||
            rec.outcomes.discharge_location >= kNumDischargeLoc)
            throw DataError("patient " + std::to_string(rec.id) + ": bad discharge location");
        return rec.outcomes.discharge_location + 1;
    }
    return 0;
}

StaticLabels label_static(const PatientRecord& rec) {
    StaticLabels out;
    if (rec.stay_hours <= kStaticAnchorHour + 12) return out;  // masked: too short
    out.valid = true;
    out.icd_bits = rec.outcomes.icd_bits;
    out.long_stay = rec.stay_hours >= 72;
    out.acuity = rec.acuity_class();
    return out;
}

bool label_readmission(const PatientRecord& rec) { return rec.readmitted_within_30d(); }

WbmLabels label_wbm(const PatientRecord& rec, int anchor) {
    check_anchor(rec, anchor);
    WbmLabels out;
    if (anchor + 1 > rec.stay_hours) return out;  // no next hour in record
    out.valid = true;
    out.measured_next.resize(kNumChannels);
    out.values_next.assign(kNumChannels, 0.0);
    for (int c = 0; c < kNumChannels; ++c) {
        bool m = rec.measured_at(anchor, c);  // hour index `anchor` is the next unobserved hour
        out.measured_next[static_cast<size_t>(c)] = m ? 1 : 0;
        if (m) out.values_next[static_cast<size_t>(c)] = rec.value_at(anchor, c);
    }
    return out;
}

std::vector<int> label_fts(const PatientRecord& rec, int anchor) {
    check_anchor(rec, anchor);
    std::vector<int> seq;
    int prev = -1;
    for (int h = anchor; h < rec.stay_hours; ++h) {
        int tok = rec.treatment_token(h);
        if (tok != prev) {
            seq.push_back(tok);
            prev = tok;
        }
    }
    seq.push_back(kEosToken);
    return seq;
}

// ---- anchors --------------------------------------------------------------------

uint64_t anchor_group(const TaskSpec& spec) {
    return static_cast<uint64_t>(spec.temporal) * 1000 + static_cast<uint64_t>(spec.gap_hours);
}

std::vector<int> valid_anchor_hours(const PatientRecord& rec, const TaskSpec& spec) {
    std::vector<int> hours;
    switch (spec.temporal) {
        case Temporal::Rolling: {
            int hi = rec.stay_hours - spec.gap_hours;
            for (int t = kMinHistoryHours; t <= hi; ++t) hours.push_back(t);
            break;
        }
        case Temporal::Autoregressive: {
            int hi = rec.stay_hours - 1;
            for (int t = kMinHistoryHours; t <= hi; ++t) hours.push_back(t);
            break;
        }
        case Temporal::Static:
            if (label_static(rec).valid) hours.push_back(kStaticAnchorHour);
            break;
        case Temporal::Terminal:
            hours.push_back(std::max(1, rec.stay_hours - kTerminalWindowHours));
            break;
    }
    return hours;
}

std::vector<int> sample_eval_points(const PatientRecord& rec, const TaskSpec& spec, uint64_t seed) {
    std::vector<int> hours = valid_anchor_hours(rec, spec);
    if (hours.empty()) return hours;
    if (spec.temporal == Temporal::Static || spec.temporal == Temporal::Terminal) return hours;
    if (static_cast<int>(hours.size()) <= kEvalPointsPerPatient) return hours;
    Rng rng(mix_seed(seed, "anchors", rec.id, anchor_group(spec)));
    rng.shuffle(hours);
    hours.resize(kEvalPointsPerPatient);
    std::sort(hours.begin(), hours.end());
    return hours;
}

}  // namespace mtlb
