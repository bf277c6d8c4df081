#include "calibrate.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "common.hpp"

namespace mtlb {

void CalibrationStats::add(const PatientRecord& rec) {
    ++patients;
    total_hours += rec.stay_hours;
    if (rec.outcomes.death_hour >= 0) ++died_icu;
    if (rec.outcomes.died_in_hospital) ++died_hosp;
    if (label_readmission(rec)) ++readmitted;
    if (rec.sex == 0) ++female;
    StaticLabels st = label_static(rec);
    if (st.valid) {
        ++static_valid;
        if (st.long_stay) ++long_stay;
    }
    for (int k = 0; k < kNumIcd; ++k)
        if (rec.outcomes.icd_bits & (1u << k)) ++icd_patients[static_cast<size_t>(k)];
    ++acuity_counts[static_cast<size_t>(rec.acuity_class())];

    for (int h = 0; h < rec.stay_hours; ++h) {
        ++token_hours[static_cast<size_t>(rec.treatment_token(h))];
        for (int c = 0; c < kNumChannels; ++c) {
            if (!rec.measured_at(h, c)) continue;
            ++measured_hours[static_cast<size_t>(c)];
            double v = rec.value_at(h, c);
            value_moments[0] += v;
            value_moments[1] += v * v;
            ++value_count;
        }
    }

    const TaskSpec& mor24 = task_by_id("MOR24");
    for (int t : sample_eval_points(rec, mor24, anchor_seed)) {
        TriLabel l = label_rolling_event(rec, RollingEvent::Death, t, mor24.gap_hours,
                                         mor24.horizon_hours);
        if (l == TriLabel::Positive) ++mor24_pos;
        if (l == TriLabel::Negative) ++mor24_neg;
    }
    const TaskSpec& cmo24 = task_by_id("CMO24");
    for (int t : sample_eval_points(rec, cmo24, anchor_seed)) {
        TriLabel l = label_rolling_event(rec, RollingEvent::CmoOrder, t, cmo24.gap_hours,
                                         cmo24.horizon_hours);
        if (l == TriLabel::Positive) ++cmo24_pos;
        if (l == TriLabel::Negative) ++cmo24_neg;
    }
    const TaskSpec& dis48 = task_by_id("DIS48");
    for (int t : sample_eval_points(rec, dis48, anchor_seed)) {
        auto cls = label_discharge(rec, t, dis48.gap_hours, dis48.horizon_hours);
        if (cls) ++dis48_counts[static_cast<size_t>(*cls)];
    }
}

namespace {

struct Line {
    std::string key;
    double target, achieved, tol;
    bool ok() const { return std::abs(achieved - target) <= tol; }
};

std::vector<Line> build_lines(const CalibrationStats& s, const CalibrationTargets& tg) {
    std::vector<Line> lines;
    auto frac = [](int64_t num, int64_t den) {
        return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
    };
    double mor24_mca = frac(s.mor24_neg, s.mor24_pos + s.mor24_neg);
    double cmo24_mca = frac(s.cmo24_neg, s.cmo24_pos + s.cmo24_neg);
    lines.push_back({"mor24.mca", 1.0 - tg.mor24_positive, mor24_mca, 0.010});
    lines.push_back({"cmo24.mca", 1.0 - tg.cmo24_positive, cmo24_mca, 0.005});
    lines.push_back({"rea.mca", 1.0 - tg.readmission, 1.0 - frac(s.readmitted, s.patients), 0.010});
    lines.push_back({"icu_mortality", tg.icu_mortality, frac(s.died_icu, s.patients), 0.010});
    lines.push_back(
        {"hospital_mortality", tg.hospital_mortality, frac(s.died_hosp, s.patients), 0.010});
    lines.push_back({"los.positive", tg.long_stay, frac(s.long_stay, s.static_valid), 0.030});
    for (int c = 0; c < kNumChannels; ++c) {
        const auto& ch = channel_table()[static_cast<size_t>(c)];
        lines.push_back({"measured." + std::to_string(c), ch.measurement_rate,
                         frac(s.measured_hours[static_cast<size_t>(c)], s.total_hours), 0.020});
    }
    for (int k = 0; k < kNumIcd; ++k) {
        const auto& icd = icd_table()[static_cast<size_t>(k)];
        lines.push_back({"icd." + std::to_string(k), icd.rate,
                         frac(s.icd_patients[static_cast<size_t>(k)], s.patients), 0.030});
    }
    for (int a = 0; a < kAcuClasses; ++a) {
        lines.push_back({"acuity." + std::to_string(a), acuity_table()[static_cast<size_t>(a)].rate,
                         frac(s.acuity_counts[static_cast<size_t>(a)], s.patients), 0.020});
    }
    int64_t dis_total = 0;
    for (int64_t v : s.dis48_counts) dis_total += v;
    for (int d = 0; d < kDisClasses; ++d) {
        // The no-discharge share is dominated by the stay-length distribution,
        // which is pinned by the LOS target; its band is correspondingly wide.
        double tol = d == 0 ? 0.30 : 0.08;
        lines.push_back({"dis48." + std::to_string(d), discharge_table()[static_cast<size_t>(d)].rate_48h,
                         frac(s.dis48_counts[static_cast<size_t>(d)], dis_total), tol});
    }
    double vmean = s.value_count > 0 ? s.value_moments[0] / static_cast<double>(s.value_count) : 0.0;
    double vvar = s.value_count > 0
                      ? s.value_moments[1] / static_cast<double>(s.value_count) - vmean * vmean
                      : 0.0;
    lines.push_back({"values.mean", 0.0, vmean, 0.10});
    lines.push_back({"values.var", 1.0, vvar, 0.25});
    return lines;
}

}  // namespace

void write_calibration_manifest(const CalibrationStats& stats, const CalibrationTargets& targets,
                                const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write calibration manifest: " + path);
    out << "mtlb.calibration.version = 1\n";
    out << "patients = " << stats.patients << "\n";
    out << "mean_stay_hours = " << format_fixed(
               stats.patients ? static_cast<double>(stats.total_hours) / static_cast<double>(stats.patients) : 0.0, 2)
        << "\n";
    for (const auto& l : build_lines(stats, targets)) {
        out << l.key << ".target = " << format_fixed(l.target, 4) << "\n";
        out << l.key << ".achieved = " << format_fixed(l.achieved, 4) << "\n";
        out << l.key << ".tolerance = " << format_fixed(l.tol, 4) << "\n";
        out << l.key << ".ok = " << (l.ok() ? 1 : 0) << "\n";
    }
    for (int t = 0; t < kTreatmentTokens; ++t) {
        out << "token_rate." << t << " = "
            << format_fixed(stats.total_hours
                                ? static_cast<double>(stats.token_hours[static_cast<size_t>(t)]) /
                                      static_cast<double>(stats.total_hours)
                                : 0.0,
                            4)
            << "\n";
    }
}

std::string calibration_report(const CalibrationStats& stats, const CalibrationTargets& targets) {
    std::ostringstream os;
    os << "key                      target  achieved  band    ok\n";
    for (const auto& l : build_lines(stats, targets)) {
        os << l.key;
        for (size_t i = l.key.size(); i < 24; ++i) os << ' ';
        os << ' ' << format_fixed(l.target, 4) << "  " << format_fixed(l.achieved, 4) << "  "
           << format_fixed(l.tol, 4) << "  " << (l.ok() ? "yes" : "NO") << "\n";
    }
    return os.str();
}

bool calibration_ok(const CalibrationStats& stats, const CalibrationTargets& targets) {
    for (const auto& l : build_lines(stats, targets))
        if (!l.ok()) return false;
    return true;
}

}  // namespace mtlb
