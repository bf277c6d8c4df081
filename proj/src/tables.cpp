#include "tables.hpp"

#include <fstream>

#include "common.hpp"

namespace mtlb {

const std::array<ChannelInfo, kNumChannels>& channel_table() {
    static const std::array<ChannelInfo, kNumChannels> table = {{
        {"Heart Rate", 0.916},
        {"Respiratory Rate", 0.902},
        {"Diastolic Blood Pressure", 0.888},
        {"Systolic Blood Pressure", 0.888},
        {"Mean Blood Pressure", 0.883},
        {"Oxygen Saturation", 0.876},
        {"Temperature", 0.298},
        {"Glucose", 0.232},
        {"Central Venous Pressure", 0.203},
        {"Glascow Coma Scale Total", 0.177},
        {"Hematocrit", 0.112},
        {"Potassium", 0.104},
        {"Sodium", 0.099},
        {"Pulmonary Artery Pressure Systolic", 0.094},
        {"Chloride", 0.094},
        {"Ph", 0.092},
        {"Hemoglobin", 0.090},
        {"Creatinine", 0.088},
        {"Blood Urea Nitrogen", 0.087},
        {"Bicarbonate", 0.086},
        {"Magnesium", 0.083},
        {"Anion Gap", 0.083},
        {"Partial Pressure Of Carbon Dioxide", 0.083},
        {"Co2 (Etco2, Pco2, Etc.)", 0.083},
        {"Platelets", 0.082},
        {"Positive End-Expiratory Pressure Set", 0.080},
        {"White Blood Cell Count", 0.079},
        {"Calcium", 0.071},
        {"Fraction Inspired Oxygen Set", 0.070},
        {"Tidal Volume Observed", 0.068},
        {"Mean Corpuscular Hemoglobin Concentration", 0.062},
        {"Mean Corpuscular Volume", 0.062},
        {"Red Blood Cell Count", 0.062},
        {"Mean Corpuscular Hemoglobin", 0.062},
        {"Partial Thromboplastin Time", 0.060},
        {"Prothrombin Time Inr", 0.057},
        {"Prothrombin Time Pt", 0.057},
        {"Peak Inspiratory Pressure", 0.056},
        {"Phosphate", 0.055},
        {"Phosphorous", 0.054},
        {"Respiratory Rate Set", 0.049},
        {"Calcium Ionized", 0.049},
        {"Fraction Inspired Oxygen", 0.047},
        {"Tidal Volume Set", 0.046},
        {"Partial Pressure Of Oxygen", 0.043},
        {"Cardiac Index", 0.036},
        {"Co2", 0.035},
        {"Pulmonary Artery Pressure Mean", 0.035},
        {"Tidal Volume Spontaneous", 0.035},
        {"Plateau Pressure", 0.034},
        {"Systemic Vascular Resistance", 0.034},
        {"Potassium Serum", 0.032},
        {"Cardiac Output Thermodilution", 0.030},
        {"Lactate", 0.027},
        {"Weight", 0.025},
        {"Lactic Acid", 0.024},
    }};
    return table;
}

const std::array<DischargeInfo, kDisClasses>& discharge_table() {
    static const std::array<DischargeInfo, kDisClasses> table = {{
        {"No Discharge", 0.730, 0.473},
        {"Home Health Care", 0.077, 0.151},
        {"Home", 0.073, 0.140},
        {"Skilled Nursing Facility (SNF)", 0.052, 0.103},
        {"Rehab/Distinct Part Hosp", 0.040, 0.079},
        {"Long Term Care Hospital", 0.011, 0.022},
        {"Discharge-Transfer Cancer/Children Hospital", 0.004, 0.009},
        {"Short Term Hospital", 0.003, 0.006},
        {"Discharge-Transfer To Psych Hospital", 0.003, 0.006},
        {"Hospice-Home", 0.003, 0.005},
        {"Left Against Medical Advice", 0.001, 0.002},
        {"Hospice-Medical Facility", 0.001, 0.002},
        {"Home With Home Iv Provider", 0.000, 0.001},
        {"Integrated Care Facility (ICF)", 0.000, 0.001},
        {"Other Facility", 0.000, 0.001},
        {"Discharge-Transfer To Federal Hc", 0.000, 0.000},
        {"Snf-Medicaid Only Certif", 0.000, 0.000},
    }};
    return table;
}

const std::array<IcdInfo, kNumIcd>& icd_table() {
    static const std::array<IcdInfo, kNumIcd> table = {{
        {"Circulatory", 0.722},
        {"Endocrine", 0.635},
        {"Respiratory", 0.530},
        {"Injury", 0.500},
        {"Digestive", 0.489},
        {"Ill Defined", 0.487},
        {"Genitourinary", 0.480},
        {"Blood", 0.479},
        {"Mental Health", 0.432},
        {"Infection", 0.418},
        {"Nervous", 0.408},
        {"Musculoskeletal", 0.335},
        {"Neoplasm", 0.298},
        {"Skin", 0.227},
        {"Congenital", 0.083},
        {"Pregnancy", 0.012},
        {"Unknown", 0.0002},
        {"Perinatal", 0.0},
    }};
    return table;
}

const std::array<AcuityInfo, kAcuClasses>& acuity_table() {
    static const std::array<AcuityInfo, kAcuClasses> table = {{
        {"Discharge to Home Health Care", 0.253},
        {"Discharge to Home", 0.240},
        {"Discharge to SNF", 0.172},
        {"Discharge to Rehab/Distinct Part Hosp", 0.132},
        {"Discharge to Long Term Care Hospital", 0.036},
        {"Discharge-Transfer Cancer/Children Hospital", 0.015},
        {"Discharge to Short Term Hospital", 0.011},
        {"Discharge-Transfer To Psych Hosp", 0.010},
        {"Discharge to Hospice-Home", 0.009},
        {"Left Against Medical Advice", 0.004},
        {"Discharge to Hospice-Medical Facility", 0.003},
        {"Discharge to Home With Home Iv Provider", 0.002},
        {"Discharge to ICF", 0.001},
        {"Discharge to Other Facility", 0.001},
        {"Discharge-Transfer To Federal Hc", 0.0},
        {"Discharge to SNF-Medicaid Only Certified", 0.0},
        {"In ICU Mortality", 0.074},
        {"In Hospital Mortality", 0.037},
    }};
    return table;
}

const std::array<const char*, kNumTreatments>& treatment_names() {
    static const std::array<const char*, kNumTreatments> names = {"ventilation", "vasopressor",
                                                                  "fluid_bolus"};
    return names;
}

std::string token_name(int token) {
    if (token == kEosToken) return "EOS";
    if (token == kStartToken) return "START";
    if (token < 0 || token > 7) throw UsageError("token out of vocabulary: " + std::to_string(token));
    if (token == 0) return "none";
    std::string s;
    for (int b = 0; b < kNumTreatments; ++b) {
        if (token & (1 << b)) {
            if (!s.empty()) s += "+";
            s += treatment_names()[static_cast<size_t>(b)];
        }
    }
    return s;
}

void write_label_manifest(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write label manifest: " + path);
    out << "mtlb.labels.version = " << kLabelManifestVersion << "\n";
    for (int i = 0; i < kNumChannels; ++i)
        out << "channel." << i << " = " << channel_table()[static_cast<size_t>(i)].name << "\n";
    for (int i = 0; i < kNumTreatments; ++i)
        out << "treatment." << i << " = " << treatment_names()[static_cast<size_t>(i)] << "\n";
    for (int i = 0; i < kDisClasses; ++i)
        out << "discharge." << i << " = " << discharge_table()[static_cast<size_t>(i)].name << "\n";
    for (int i = 0; i < kNumIcd; ++i)
        out << "icd." << i << " = " << icd_table()[static_cast<size_t>(i)].name << "\n";
    for (int i = 0; i < kAcuClasses; ++i)
        out << "acuity." << i << " = " << acuity_table()[static_cast<size_t>(i)].name << "\n";
    for (int i = 0; i <= kEosToken; ++i) out << "token." << i << " = " << token_name(i) << "\n";
}

}  // namespace mtlb
