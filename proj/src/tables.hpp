#pragma once

#include <array>
#include <string>
#include <vector>

namespace mtlb {

// Canonical label spaces and cohort rates used both as generator calibration
// targets and as the class-index binding for ingested data. Order is
// load-bearing: class indices are positions in these arrays. The manifest file
// (write_label_manifest) versions this binding for external data.

inline constexpr int kNumChannels = 56;
inline constexpr int kNumTreatments = 3;  // ventilation, vasopressor, fluid bolus
inline constexpr int kNumIcd = 18;
inline constexpr int kNumDischargeLoc = 16;  // destinations, excluding "No Discharge"
inline constexpr int kDisClasses = kNumDischargeLoc + 1;  // + "No Discharge"
inline constexpr int kAcuClasses = 18;  // 16 destinations + 2 mortality classes
inline constexpr int kLabelManifestVersion = 1;

struct ChannelInfo {
    const char* name;
    double measurement_rate;  // fraction of patient-hours measured
};

const std::array<ChannelInfo, kNumChannels>& channel_table();

struct DischargeInfo {
    const char* name;
    double rate_24h;  // fraction of patient-hours discharged there within 24h
    double rate_48h;
};

// Index 0 is "No Discharge"; destinations follow in table order.
const std::array<DischargeInfo, kDisClasses>& discharge_table();

struct IcdInfo {
    const char* name;
    double rate;  // fraction of patients with >=1 code in the category
};

const std::array<IcdInfo, kNumIcd>& icd_table();

struct AcuityInfo {
    const char* name;
    double rate;  // fraction of patients with this final outcome
};

// Indices 0..15 are discharge destinations (same order as discharge_table()
// minus "No Discharge"), 16 = In ICU Mortality, 17 = In Hospital Mortality.
inline constexpr int kAcuInIcuMortality = 16;
inline constexpr int kAcuInHospitalMortality = 17;
const std::array<AcuityInfo, kAcuClasses>& acuity_table();

const std::array<const char*, kNumTreatments>& treatment_names();

// Treatment-set token vocabulary for the sequential decoding task: tokens 0..7
// are subsets of {vent, vaso, bolus} encoded as bitmasks, 8 is end-of-sequence
// and 9 is the decoder-input start sentinel (never a target).
inline constexpr int kTreatmentTokens = 8;
inline constexpr int kEosToken = 8;
inline constexpr int kStartToken = 9;
inline constexpr int kSeqVocab = 9;   // target classes: 8 subsets + EOS
std::string token_name(int token);

void write_label_manifest(const std::string& path);

}  // namespace mtlb
