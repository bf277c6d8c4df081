#pragma once

#include <array>
#include <string>

#include "data.hpp"
#include "tasks.hpp"

namespace mtlb {

// Streaming accumulator for the generator's achieved marginals. Anchor-level
// statistics use the regular evaluation-point sampler so they measure exactly
// what a model would be scored on.
struct CalibrationStats {
    uint64_t anchor_seed = 0;
    int64_t patients = 0;
    int64_t total_hours = 0;
    int64_t died_icu = 0, died_hosp = 0, readmitted = 0, long_stay = 0, static_valid = 0;
    int64_t female = 0;
    int64_t mor24_pos = 0, mor24_neg = 0;
    int64_t cmo24_pos = 0, cmo24_neg = 0;
    std::array<int64_t, kNumChannels> measured_hours{};
    std::array<double, 2> value_moments{};  // sum, sum of squares over measured entries
    int64_t value_count = 0;
    std::array<int64_t, kNumIcd> icd_patients{};
    std::array<int64_t, kDisClasses> dis48_counts{};
    std::array<int64_t, kAcuClasses> acuity_counts{};
    std::array<int64_t, kTreatmentTokens> token_hours{};

    void add(const PatientRecord& rec);
};

// Writes the key-value calibration manifest: one block per target with
// target / achieved / tolerance band / ok flag.
void write_calibration_manifest(const CalibrationStats& stats, const CalibrationTargets& targets,
                                const std::string& path);

// Human-readable achieved-vs-target lines (also printed by gen-data).
std::string calibration_report(const CalibrationStats& stats, const CalibrationTargets& targets);
bool calibration_ok(const CalibrationStats& stats, const CalibrationTargets& targets);

}  // namespace mtlb
