#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tables.hpp"

namespace mtlb {

struct PatientOutcomes {
    int death_hour = -1;           // in-ICU death; equals stay end when set
    bool died_in_hospital = false; // died after ICU discharge (acuity only)
    int discharge_hour = 0;        // always == stay end
    int discharge_location = -1;   // 0..15 destination index; -1 when died in ICU
    int cmo_hour = -1;
    int dnr_hour = -1;
    uint32_t icd_bits = 0;         // bit k = ICD category k present
    int readmit_gap_days = -1;     // -1 = no later ICU admission observed
};

// One patient's hourly record. Channel values are standardized; unmeasured
// entries are stored as 0 and the mask is authoritative. The latent severity
// path is generator provenance: present for synthetic cohorts, empty for
// ingested data.
struct PatientRecord {
    uint32_t id = 0;
    uint8_t sex = 0;  // 0 = F, 1 = M (genotypical)
    int stay_hours = 0;
    std::vector<double> channels;    // stay_hours * kNumChannels
    std::vector<uint8_t> measured;   // stay_hours * kNumChannels
    std::vector<uint8_t> treatments; // stay_hours * kNumTreatments
    std::vector<double> severity;    // stay_hours or empty
    PatientOutcomes outcomes;

    double value_at(int hour, int ch) const {
        return channels[static_cast<size_t>(hour) * kNumChannels + static_cast<size_t>(ch)];
    }
    bool measured_at(int hour, int ch) const {
        return measured[static_cast<size_t>(hour) * kNumChannels + static_cast<size_t>(ch)] != 0;
    }
    bool treated_at(int hour, int t) const {
        return treatments[static_cast<size_t>(hour) * kNumTreatments + static_cast<size_t>(t)] != 0;
    }
    // Treatment-set token (bitmask over {vent, vaso, bolus}) for one hour.
    int treatment_token(int hour) const {
        int tok = 0;
        for (int t = 0; t < kNumTreatments; ++t)
            if (treated_at(hour, t)) tok |= 1 << t;
        return tok;
    }
    int acuity_class() const;
    bool readmitted_within_30d() const {
        return outcomes.readmit_gap_days >= 0 && outcomes.readmit_gap_days <= 30;
    }
    void validate() const;  // invariant checks, throws DataError
};

enum class Split : uint8_t { Train = 0, Tune = 1, Test = 2 };

struct DatasetInfo {
    uint64_t seed = 0;
    uint32_t n_patients = 0;
    bool adversarial = false;
    std::string adversarial_category;  // task category driven by independent noise
    bool has_latent = true;
};

struct CohortDataset {
    DatasetInfo info;
    std::vector<PatientRecord> records;
    std::vector<Split> split;  // parallel to records

    std::vector<uint32_t> indices_of(Split s) const;
    // Stable content signature for config hashing / resume identity.
    uint64_t signature() const;
};

// ---- generation -------------------------------------------------------------

// Marginal rates the generator is steered toward. Rates must lie in [0,1];
// anything else is a calibration error. Tolerance bands are recorded in the
// calibration manifest next to achieved values.
struct CalibrationTargets {
    double icu_mortality = 0.074;       // acuity table
    double hospital_mortality = 0.037;  // acuity table
    double readmission = 0.050;         // Task table MCA 0.950
    double long_stay = 0.529;           // LOS positive rate
    double mor24_positive = 0.020;      // rolling 24h mortality anchor rate (MCA 0.980)
    double cmo24_positive = 0.008;      // MCA 0.992
    void validate() const;
};

struct GeneratorConfig {
    uint64_t seed = 42;
    int n_patients = 1000;
    bool adversarial = false;
    std::string adversarial_category = "ICD";
    CalibrationTargets targets;
};

PatientRecord generate_patient(const GeneratorConfig& cfg, uint32_t index);
// Streaming generation: records are produced in index order and not retained.
void for_each_patient(const GeneratorConfig& cfg,
                      const std::function<void(PatientRecord&&)>& fn);
CohortDataset generate_cohort(const GeneratorConfig& cfg);

// Patient-level split via cumulative-floor boundaries after a seeded shuffle;
// ratios are percentages summing to 100.
std::vector<Split> split_patients(uint32_t n, int train_pct, int tune_pct, int test_pct,
                                  uint64_t seed);

// ---- subsampling -------------------------------------------------------------

struct SubsampleSpec {
    enum class Mode { None, FewShot, Imbalanced } mode = Mode::None;
    double fraction = 1.0;  // few-shot: kept fraction; imbalanced: removed female fraction
    uint64_t seed = 0;
};

// Applies only to the training split; tune/test are never touched. Returns the
// kept subset of train_indices (order preserved).
std::vector<uint32_t> subsample_train(const CohortDataset& ds,
                                      const std::vector<uint32_t>& train_indices,
                                      const SubsampleSpec& spec);

// The 13-point few-shot fraction grid, in percent.
const std::vector<double>& fewshot_grid_percent();

// ---- model input windows ------------------------------------------------------

// Input layout per hour: values (LOCF-imputed, 0 before first observation),
// measurement mask, treatment flags.
inline constexpr int kInputChannels = kNumChannels * 2 + kNumTreatments;

// Fills a [window_hours x kInputChannels] row-major buffer for the window of
// hours [end_hour - window_hours, end_hour). Hours before admission are
// zero-valued with zero mask (left padding).
void fill_input_window(const PatientRecord& rec, int end_hour, int window_hours, double* out);

// Uniform window placement for one training epoch: returns the window end hour.
// Stays shorter than the window yield end = stay (padded on the left).
int sample_window_end(int stay_hours, int window_hours, Rng& rng);

// ---- persistence ---------------------------------------------------------------

// Binary dataset format MTLD1: header, length-prefixed per-patient blocks,
// trailing CRC32 over everything before it.
void save_dataset(const CohortDataset& ds, const std::string& path);
CohortDataset load_dataset(const std::string& path);
// Streams blocks straight to disk; used by gen-data for large cohorts.
void write_dataset_streaming(const GeneratorConfig& cfg, const std::vector<Split>& split,
                             const std::string& path);

void export_csv(const CohortDataset& ds, const std::string& hourly_path,
                const std::string& static_path);

}  // namespace mtlb
