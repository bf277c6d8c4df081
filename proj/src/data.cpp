#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "common.hpp"

namespace mtlb {

int PatientRecord::acuity_class() const {
    if (outcomes.death_hour >= 0) return kAcuInIcuMortality;
    if (outcomes.died_in_hospital) return kAcuInHospitalMortality;
    return outcomes.discharge_location;
}

void PatientRecord::validate() const {
    size_t n = static_cast<size_t>(stay_hours);
    if (stay_hours <= 0) throw DataError("patient " + std::to_string(id) + ": empty stay");
    if (channels.size() != n * kNumChannels || measured.size() != n * kNumChannels ||
        treatments.size() != n * kNumTreatments)
        throw DataError("patient " + std::to_string(id) + ": buffer sizes disagree with stay");
    if (!severity.empty() && severity.size() != n)
        throw DataError("patient " + std::to_string(id) + ": severity length mismatch");
    if (outcomes.discharge_hour != stay_hours)
        throw DataError("patient " + std::to_string(id) + ": discharge hour != stay end");
    if (outcomes.death_hour >= 0) {
        if (outcomes.death_hour != stay_hours)
            throw DataError("patient " + std::to_string(id) + ": in-ICU death must end the stay");
        if (outcomes.discharge_location >= 0)
            throw DataError("patient " + std::to_string(id) + ": died in ICU but has destination");
    } else if (outcomes.discharge_location < 0 || outcomes.discharge_location >= kNumDischargeLoc) {
        throw DataError("patient " + std::to_string(id) + ": missing discharge location");
    }
    int acu = acuity_class();
    bool died = outcomes.death_hour >= 0 || outcomes.died_in_hospital;
    bool acu_mortal = acu == kAcuInIcuMortality || acu == kAcuInHospitalMortality;
    if (died != acu_mortal) throw DataError("patient " + std::to_string(id) + ": acuity inconsistent");
}

std::vector<uint32_t> CohortDataset::indices_of(Split s) const {
    std::vector<uint32_t> out;
    for (uint32_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

uint64_t CohortDataset::signature() const {
    std::string key = "MTLD1|" + std::to_string(info.seed) + "|" + std::to_string(info.n_patients) +
                      "|" + (info.adversarial ? info.adversarial_category : "-") + "|" +
                      std::to_string(records.size());
    return fnv1a64(key);
}

void CalibrationTargets::validate() const {
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError(std::string("calibration target out of [0,1]: ") + name + " = " +
                              std::to_string(v));
    };
    check(icu_mortality, "icu_mortality");
    check(hospital_mortality, "hospital_mortality");
    check(readmission, "readmission");
    check(long_stay, "long_stay");
    check(mor24_positive, "mor24_positive");
    check(cmo24_positive, "cmo24_positive");
}

namespace {

// Generator shape constants. Intercept-level rates come from
// CalibrationTargets; these control how strongly the shared latent severity
// expresses itself in each observable. The achieved marginals are checked by
// the calibration manifest, not assumed.
struct GenShape {
    double baseline_sd = 0.6;
    double ar_rho = 0.92;
    double ar_sd = 0.8;
    double death_ramp = 2.3;     // severity rise over the last 48h before death
    double cmo_ramp = 1.2;       // extra rise after a CMO order
    double recovery_dip = -0.8;  // drift down over the last 72h before live discharge
    double meas_sev_slope = 0.30;
    double treat_sev_slope[kNumTreatments] = {0.9, 1.0, 0.7};
    double treat_on_intercept[kNumTreatments] = {-4.3, -4.6, -3.8};
    double treat_off_intercept[kNumTreatments] = {-1.6, -1.2, 1.1};
    double treat_off_slope[kNumTreatments] = {-0.5, -0.6, 0.0};
    double cmo_given_death = 0.30;
    double cmo_given_alive = 0.004;
    double dnr_given_death = 0.55;
    double dnr_given_alive = 0.10;
    double stay_mu_alive = 4.30;
    double stay_sigma_alive = 0.54;
    double stay_mu_death = 4.55;
    double stay_sigma_death = 0.50;
};

const GenShape kShape{};

double sigmoidd(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

// Linear severity tilt that preserves the marginal rate (E[b]=0), clamped to
// keep probabilities valid.
double tilted(double base, double slope, double b) {
    double p = base * (1.0 + slope * std::clamp(b, -1.8, 1.8));
    return std::clamp(p, 0.0, 0.98);
}

int draw_stay(Rng& rng, bool died) {
    double mu = died ? kShape.stay_mu_death : kShape.stay_mu_alive;
    double sd = died ? kShape.stay_sigma_death : kShape.stay_sigma_alive;
    double h = std::exp(rng.normal(mu, sd));
    int lo = died ? 30 : 25;
    return std::clamp(static_cast<int>(std::lround(h)), lo, 480);
}

double channel_loading(int c) {
    double mag = c < 10 ? 0.55 : (c < 30 ? 0.40 : 0.30);
    return (c % 7 == 5) ? -mag : mag;
}

}  // namespace

PatientRecord generate_patient(const GeneratorConfig& cfg, uint32_t index) {
    cfg.targets.validate();
    Rng rng(mix_seed(cfg.seed, "patient", index));
    const CalibrationTargets& tg = cfg.targets;

    PatientRecord rec;
    rec.id = index;
    rec.sex = rng.bernoulli(0.5) ? 1 : 0;
    double b = rng.normal(0.0, kShape.baseline_sd);
    double adv_latent = rng.normal();  // drawn unconditionally to keep streams stable

    // Outcome skeleton.
    bool died_icu = rng.bernoulli(tilted(tg.icu_mortality, 0.55, b));
    rec.stay_hours = draw_stay(rng, died_icu);
    rec.outcomes.discharge_hour = rec.stay_hours;
    if (died_icu) {
        rec.outcomes.death_hour = rec.stay_hours;
    } else {
        double p_hosp = tg.hospital_mortality / std::max(1e-9, 1.0 - tg.icu_mortality);
        rec.outcomes.died_in_hospital = rng.bernoulli(tilted(p_hosp, 0.55, b));
        std::vector<double> dest(kNumDischargeLoc);
        for (int i = 0; i < kNumDischargeLoc; ++i) dest[static_cast<size_t>(i)] =
            acuity_table()[static_cast<size_t>(i)].rate;
        rec.outcomes.discharge_location = static_cast<int>(rng.categorical(dest));
    }

    // Care orders. CMO couples to death: it mostly appears late in fatal stays.
    bool has_cmo = rng.bernoulli(died_icu ? kShape.cmo_given_death : kShape.cmo_given_alive);
    if (has_cmo) {
        double gap = -20.0 * std::log(std::max(1e-12, rng.uniform()));
        int anchor_end = died_icu ? rec.outcomes.death_hour : rec.stay_hours;
        rec.outcomes.cmo_hour = std::clamp(anchor_end - static_cast<int>(std::lround(gap)), 2,
                                           std::max(2, anchor_end - 2));
    }
    bool has_dnr = rng.bernoulli(died_icu ? kShape.dnr_given_death : kShape.dnr_given_alive);
    if (has_dnr) {
        double gap = -45.0 * std::log(std::max(1e-12, rng.uniform()));
        int anchor_end = died_icu ? rec.outcomes.death_hour : rec.stay_hours;
        rec.outcomes.dnr_hour = std::clamp(anchor_end - static_cast<int>(std::lround(gap)), 1,
                                           std::max(1, anchor_end - 1));
    }

    // ICD categories: severity-tilted in normal mode. In adversarial mode the
    // panel is driven by an independent latent instead, making it pure noise
    // with respect to anything observable in the input.
    bool adv_icd = cfg.adversarial && cfg.adversarial_category == "ICD";
    for (int k = 0; k < kNumIcd; ++k) {
        double rate = icd_table()[static_cast<size_t>(k)].rate;
        double p;
        if (rate <= 0.0)
            p = 0.0;
        else if (adv_icd)
            p = sigmoidd(logit(rate) + 2.6 * adv_latent);
        else
            p = tilted(rate, 0.50, b);
        if (rng.bernoulli(p)) rec.outcomes.icd_bits |= (1u << k);
    }

    // 30-day readmission: the labeler reads the gap, "within 30 days" inclusive.
    if (!died_icu && !rec.outcomes.died_in_hospital) {
        double p_attempt = tilted(tg.readmission * 2.2, 0.30, b);
        if (rng.bernoulli(p_attempt)) rec.outcomes.readmit_gap_days = static_cast<int>(rng.uniform_int(1, 60));
    }

    // Latent severity path: baseline + AR(1) + outcome-conditioned trends.
    int T = rec.stay_hours;
    rec.severity.resize(static_cast<size_t>(T));
    double x = rng.normal(0.0, kShape.ar_sd);
    double innov = kShape.ar_sd * std::sqrt(1.0 - kShape.ar_rho * kShape.ar_rho);
    for (int t = 0; t < T; ++t) {
        double s = b + x;
        if (died_icu) {
            double to_death = static_cast<double>(rec.outcomes.death_hour - t);
            if (to_death < 48.0) s += kShape.death_ramp * (1.0 - to_death / 48.0);
        } else {
            double to_out = static_cast<double>(rec.stay_hours - t);
            if (to_out < 72.0) s += kShape.recovery_dip * (1.0 - to_out / 72.0);
        }
        if (rec.outcomes.cmo_hour >= 0 && t >= rec.outcomes.cmo_hour) s += kShape.cmo_ramp;
        rec.severity[static_cast<size_t>(t)] = s;
        x = kShape.ar_rho * x + innov * rng.normal();
    }

    // Channels, measurement mask, treatments.
    rec.channels.assign(static_cast<size_t>(T) * kNumChannels, 0.0);
    rec.measured.assign(static_cast<size_t>(T) * kNumChannels, 0);
    rec.treatments.assign(static_cast<size_t>(T) * kNumTreatments, 0);
    bool treat_on[kNumTreatments] = {false, false, false};
    for (int t = 0; t < T; ++t) {
        double s = rec.severity[static_cast<size_t>(t)];
        for (int c = 0; c < kNumChannels; ++c) {
            double base = channel_table()[static_cast<size_t>(c)].measurement_rate;
            double p = sigmoidd(logit(base) + kShape.meas_sev_slope * s);
            if (!rng.bernoulli(p)) continue;
            double lam = channel_loading(c);
            double v = lam * s + std::sqrt(std::max(0.0, 1.0 - lam * lam)) * rng.normal();
            size_t at = static_cast<size_t>(t) * kNumChannels + static_cast<size_t>(c);
            rec.measured[at] = 1;
            rec.channels[at] = v;
        }
        for (int k = 0; k < kNumTreatments; ++k) {
            double p = treat_on[k]
                           ? 1.0 - sigmoidd(kShape.treat_off_intercept[k] + kShape.treat_off_slope[k] * s)
                           : sigmoidd(kShape.treat_on_intercept[k] + kShape.treat_sev_slope[k] * s);
            treat_on[k] = rng.bernoulli(p);
            if (treat_on[k])
                rec.treatments[static_cast<size_t>(t) * kNumTreatments + static_cast<size_t>(k)] = 1;
        }
    }
    return rec;
}

void for_each_patient(const GeneratorConfig& cfg, const std::function<void(PatientRecord&&)>& fn) {
    cfg.targets.validate();
    for (int i = 0; i < cfg.n_patients; ++i) fn(generate_patient(cfg, static_cast<uint32_t>(i)));
}

CohortDataset generate_cohort(const GeneratorConfig& cfg) {
    if (cfg.n_patients < 100) throw ConfigError("generate_cohort: need at least 100 patients");
    CohortDataset ds;
    ds.info.seed = cfg.seed;
    ds.info.n_patients = static_cast<uint32_t>(cfg.n_patients);
    ds.info.adversarial = cfg.adversarial;
    ds.info.adversarial_category = cfg.adversarial ? cfg.adversarial_category : "";
    ds.info.has_latent = true;
    ds.records.reserve(static_cast<size_t>(cfg.n_patients));
    for_each_patient(cfg, [&](PatientRecord&& r) { ds.records.push_back(std::move(r)); });
    ds.split = split_patients(static_cast<uint32_t>(cfg.n_patients), 80, 10, 10,
                              mix_seed(cfg.seed, "split"));
    return ds;
}

std::vector<Split> split_patients(uint32_t n, int train_pct, int tune_pct, int test_pct,
                                  uint64_t seed) {
    if (train_pct + tune_pct + test_pct != 100) throw ConfigError("split ratios must sum to 100");
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(seed);
    rng.shuffle(order);
    // Cumulative floor boundaries reproduce the published 17500/2188/2188 at
    // n=21876 and 8/1/1 at n=10.
    uint64_t b1 = static_cast<uint64_t>(n) * static_cast<uint64_t>(train_pct) / 100;
    uint64_t b2 = static_cast<uint64_t>(n) * static_cast<uint64_t>(train_pct + tune_pct) / 100;
    if ((train_pct > 0 && b1 == 0) || (tune_pct > 0 && b2 == b1) ||
        (test_pct > 0 && b2 == n))
        throw ConfigError("too few patients for nonempty splits");
    std::vector<Split> split(n, Split::Train);
    for (uint64_t i = 0; i < n; ++i) {
        Split s = i < b1 ? Split::Train : (i < b2 ? Split::Tune : Split::Test);
        split[order[i]] = s;
    }
    return split;
}

std::vector<uint32_t> subsample_train(const CohortDataset& ds,
                                      const std::vector<uint32_t>& train_indices,
                                      const SubsampleSpec& spec) {
    if (spec.mode == SubsampleSpec::Mode::None) return train_indices;
    if (!(spec.fraction > 0.0 && spec.fraction <= 1.0))
        throw ConfigError("subsample fraction must be in (0,1]: " + std::to_string(spec.fraction));
    Rng rng(mix_seed(spec.seed, "subsample"));
    std::vector<uint32_t> kept;
    if (spec.mode == SubsampleSpec::Mode::FewShot) {
        auto n_keep = static_cast<size_t>(
            std::llround(spec.fraction * static_cast<double>(train_indices.size())));
        std::vector<uint32_t> pool = train_indices;
        rng.shuffle(pool);
        pool.resize(std::min(n_keep, pool.size()));
        std::vector<bool> in(ds.records.size(), false);
        for (uint32_t i : pool) in[i] = true;
        for (uint32_t i : train_indices)
            if (in[i]) kept.push_back(i);
    } else {  // Imbalanced: remove round(f * N_female) female patients
        std::vector<uint32_t> females;
        for (uint32_t i : train_indices)
            if (ds.records[i].sex == 0) females.push_back(i);
        auto n_remove =
            static_cast<size_t>(std::llround(spec.fraction * static_cast<double>(females.size())));
        rng.shuffle(females);
        std::vector<bool> removed(ds.records.size(), false);
        for (size_t i = 0; i < std::min(n_remove, females.size()); ++i) removed[females[i]] = true;
        for (uint32_t i : train_indices)
            if (!removed[i]) kept.push_back(i);
    }
    if (kept.empty()) throw DataError("subsampling left an empty training set");
    return kept;
}

const std::vector<double>& fewshot_grid_percent() {
    static const std::vector<double> grid = {0.1, 0.2, 0.3, 0.6,  1.0,  1.8, 3.2,
                                             5.6, 10.0, 17.8, 31.6, 56.2, 100.0};
    return grid;
}

void fill_input_window(const PatientRecord& rec, int end_hour, int window_hours, double* out) {
    if (end_hour < 1 || end_hour > rec.stay_hours)
        throw UsageError("window end " + std::to_string(end_hour) + " outside stay of " +
                         std::to_string(rec.stay_hours) + "h");
    std::fill(out, out + static_cast<size_t>(window_hours) * kInputChannels, 0.0);
    double carry[kNumChannels] = {0.0};
    bool have[kNumChannels] = {false};
    int start = end_hour - window_hours;
    for (int h = 0; h < end_hour; ++h) {
        for (int c = 0; c < kNumChannels; ++c) {
            if (rec.measured_at(h, c)) {
                carry[c] = rec.value_at(h, c);
                have[c] = true;
            }
        }
        if (h < start) continue;
        double* row = out + static_cast<size_t>(h - start) * kInputChannels;
        for (int c = 0; c < kNumChannels; ++c) {
            row[c] = have[c] ? carry[c] : 0.0;  // LOCF, else population mean (0 post-standardization)
            row[kNumChannels + c] = rec.measured_at(h, c) ? 1.0 : 0.0;
        }
        for (int k = 0; k < kNumTreatments; ++k)
            row[2 * kNumChannels + k] = rec.treated_at(h, k) ? 1.0 : 0.0;
    }
}

int sample_window_end(int stay_hours, int window_hours, Rng& rng) {
    if (stay_hours <= window_hours) return stay_hours;
    return window_hours + static_cast<int>(rng.uniform_int(0, stay_hours - window_hours));
}

// ---- persistence -------------------------------------------------------------

namespace {

constexpr char kDatasetMagic[5] = {'M', 'T', 'L', 'D', '1'};
constexpr uint8_t kDatasetVersion = 1;
constexpr int kMaskBytesPerHour = (kNumChannels + 7) / 8;

void write_header(ByteWriter& w, const DatasetInfo& info) {
    w.raw(kDatasetMagic, 5);
    w.u8(kDatasetVersion);
    uint8_t flags = (info.has_latent ? 1 : 0) | (info.adversarial ? 2 : 0);
    w.u8(flags);
    w.str(info.adversarial ? info.adversarial_category : "");
    w.u64(info.seed);
    w.u32(info.n_patients);
    w.u16(kNumChannels);
    w.u8(kNumTreatments);
    w.u8(kNumIcd);
}

void write_block(ByteWriter& w, const PatientRecord& rec, Split split, bool with_latent) {
    ByteWriter b;
    b.u32(rec.id);
    b.u8(rec.sex);
    b.u8(static_cast<uint8_t>(split));
    b.u16(static_cast<uint16_t>(rec.stay_hours));
    b.i32(rec.outcomes.death_hour);
    b.u8(rec.outcomes.died_in_hospital ? 1 : 0);
    b.i32(rec.outcomes.discharge_hour);
    b.i32(rec.outcomes.discharge_location);
    b.i32(rec.outcomes.cmo_hour);
    b.i32(rec.outcomes.dnr_hour);
    b.u32(rec.outcomes.icd_bits);
    b.i32(rec.outcomes.readmit_gap_days);
    for (int h = 0; h < rec.stay_hours; ++h) {
        uint8_t bytes[kMaskBytesPerHour] = {0};
        for (int c = 0; c < kNumChannels; ++c)
            if (rec.measured_at(h, c)) bytes[c / 8] |= static_cast<uint8_t>(1 << (c % 8));
        b.raw(bytes, kMaskBytesPerHour);
    }
    for (int h = 0; h < rec.stay_hours; ++h)
        b.u8(static_cast<uint8_t>(rec.treatment_token(h)));
    for (int h = 0; h < rec.stay_hours; ++h)
        for (int c = 0; c < kNumChannels; ++c)
            if (rec.measured_at(h, c)) b.f64(rec.value_at(h, c));
    if (with_latent) {
        if (rec.severity.size() != static_cast<size_t>(rec.stay_hours))
            throw DataError("record " + std::to_string(rec.id) + " lacks a severity path");
        for (double s : rec.severity) b.f64(s);
    }
    w.u32(static_cast<uint32_t>(b.buf.size()));
    w.raw(b.buf.data(), b.buf.size());
}

PatientRecord read_block(ByteReader& r, Split& split, bool with_latent) {
    uint32_t len = r.u32();
    r.need(len);
    ByteReader b(r.p, len);
    r.p += len;
    PatientRecord rec;
    rec.id = b.u32();
    rec.sex = b.u8();
    uint8_t sp = b.u8();
    if (sp > 2) throw DataError("bad split value " + std::to_string(sp));
    split = static_cast<Split>(sp);
    rec.stay_hours = b.u16();
    rec.outcomes.death_hour = b.i32();
    rec.outcomes.died_in_hospital = b.u8() != 0;
    rec.outcomes.discharge_hour = b.i32();
    rec.outcomes.discharge_location = b.i32();
    rec.outcomes.cmo_hour = b.i32();
    rec.outcomes.dnr_hour = b.i32();
    rec.outcomes.icd_bits = b.u32();
    rec.outcomes.readmit_gap_days = b.i32();
    int T = rec.stay_hours;
    rec.channels.assign(static_cast<size_t>(T) * kNumChannels, 0.0);
    rec.measured.assign(static_cast<size_t>(T) * kNumChannels, 0);
    rec.treatments.assign(static_cast<size_t>(T) * kNumTreatments, 0);
    for (int h = 0; h < T; ++h) {
        uint8_t bytes[kMaskBytesPerHour];
        b.raw(bytes, kMaskBytesPerHour);
        for (int c = 0; c < kNumChannels; ++c)
            if (bytes[c / 8] & (1 << (c % 8)))
                rec.measured[static_cast<size_t>(h) * kNumChannels + static_cast<size_t>(c)] = 1;
    }
    for (int h = 0; h < T; ++h) {
        uint8_t tok = b.u8();
        for (int k = 0; k < kNumTreatments; ++k)
            if (tok & (1 << k))
                rec.treatments[static_cast<size_t>(h) * kNumTreatments + static_cast<size_t>(k)] = 1;
    }
    for (int h = 0; h < T; ++h)
        for (int c = 0; c < kNumChannels; ++c)
            if (rec.measured_at(h, c))
                rec.channels[static_cast<size_t>(h) * kNumChannels + static_cast<size_t>(c)] = b.f64();
    if (with_latent) {
        rec.severity.resize(static_cast<size_t>(T));
        for (double& s : rec.severity) s = b.f64();
    }
    if (b.remaining() != 0) throw DataError("trailing bytes in patient block");
    rec.validate();
    return rec;
}

}  // namespace

void save_dataset(const CohortDataset& ds, const std::string& path) {
    if (ds.records.size() != ds.split.size()) throw UsageError("dataset split not assigned");
    ByteWriter w;
    DatasetInfo info = ds.info;
    info.n_patients = static_cast<uint32_t>(ds.records.size());
    write_header(w, info);
    for (size_t i = 0; i < ds.records.size(); ++i)
        write_block(w, ds.records[i], ds.split[i], info.has_latent);
    uint32_t crc = crc32(w.buf.data(), w.buf.size());
    w.u32(crc);
    write_file_atomic(path, w.buf);
}

CohortDataset load_dataset(const std::string& path) {
    auto bytes = read_file(path);
    if (bytes.size() < 9) throw DataError("dataset file too short: " + path);
    uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<uint32_t>(bytes[bytes.size() - 4 + static_cast<size_t>(i)]) << (8 * i);
    uint32_t actual = crc32(bytes.data(), bytes.size() - 4);
    if (stored_crc != actual) throw DataError("dataset checksum failure: " + path);

    ByteReader r(bytes.data(), bytes.size() - 4);
    char magic[5];
    r.raw(magic, 5);
    if (std::memcmp(magic, kDatasetMagic, 5) != 0) throw DataError("bad dataset magic: " + path);
    uint8_t version = r.u8();
    if (version != kDatasetVersion)
        throw DataError("unsupported dataset version " + std::to_string(version));
    uint8_t flags = r.u8();
    CohortDataset ds;
    ds.info.has_latent = (flags & 1) != 0;
    ds.info.adversarial = (flags & 2) != 0;
    ds.info.adversarial_category = r.str();
    ds.info.seed = r.u64();
    ds.info.n_patients = r.u32();
    if (r.u16() != kNumChannels || r.u8() != kNumTreatments || r.u8() != kNumIcd)
        throw DataError("dataset schema does not match this build");
    ds.records.reserve(ds.info.n_patients);
    ds.split.reserve(ds.info.n_patients);
    for (uint32_t i = 0; i < ds.info.n_patients; ++i) {
        Split sp;
        ds.records.push_back(read_block(r, sp, ds.info.has_latent));
        ds.split.push_back(sp);
    }
    if (r.remaining() != 0) throw DataError("trailing bytes in dataset: " + path);
    return ds;
}

void write_dataset_streaming(const GeneratorConfig& cfg, const std::vector<Split>& split,
                             const std::string& path) {
    if (static_cast<int>(split.size()) != cfg.n_patients)
        throw UsageError("split size does not match patient count");
    std::string tmp = path + ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write dataset: " + tmp);

    ByteWriter header;
    DatasetInfo info;
    info.seed = cfg.seed;
    info.n_patients = static_cast<uint32_t>(cfg.n_patients);
    info.adversarial = cfg.adversarial;
    info.adversarial_category = cfg.adversarial ? cfg.adversarial_category : "";
    info.has_latent = true;
    write_header(header, info);
    uint32_t crc = crc32(header.buf.data(), header.buf.size());
    out.write(reinterpret_cast<const char*>(header.buf.data()),
              static_cast<std::streamsize>(header.buf.size()));

    for (int i = 0; i < cfg.n_patients; ++i) {
        PatientRecord rec = generate_patient(cfg, static_cast<uint32_t>(i));
        ByteWriter w;
        write_block(w, rec, split[static_cast<size_t>(i)], true);
        crc = crc32(w.buf.data(), w.buf.size(), crc);
        out.write(reinterpret_cast<const char*>(w.buf.data()),
                  static_cast<std::streamsize>(w.buf.size()));
    }
    ByteWriter trailer;
    trailer.u32(crc);
    out.write(reinterpret_cast<const char*>(trailer.buf.data()), 4);
    out.close();
    if (!out) throw DataError("write failed: " + tmp);
    std::filesystem::rename(tmp, path);
}

void export_csv(const CohortDataset& ds, const std::string& hourly_path,
                const std::string& static_path) {
    std::ofstream hs(hourly_path, std::ios::trunc);
    if (!hs) throw DataError("cannot write " + hourly_path);
    hs << "patient_id,hour";
    for (int c = 0; c < kNumChannels; ++c) hs << ",value_" << c;
    for (int c = 0; c < kNumChannels; ++c) hs << ",measured_" << c;
    for (int k = 0; k < kNumTreatments; ++k) hs << "," << treatment_names()[static_cast<size_t>(k)];
    hs << "\n";
    for (const auto& rec : ds.records) {
        for (int h = 0; h < rec.stay_hours; ++h) {
            hs << rec.id << "," << h;
            for (int c = 0; c < kNumChannels; ++c) {
                hs << ",";
                if (rec.measured_at(h, c)) hs << format_fixed(rec.value_at(h, c), 6);
            }
            for (int c = 0; c < kNumChannels; ++c) hs << "," << (rec.measured_at(h, c) ? 1 : 0);
            for (int k = 0; k < kNumTreatments; ++k) hs << "," << (rec.treated_at(h, k) ? 1 : 0);
            hs << "\n";
        }
    }

    std::ofstream ss(static_path, std::ios::trunc);
    if (!ss) throw DataError("cannot write " + static_path);
    ss << "patient_id,sex,split,stay_hours,death_hour,died_in_hospital,discharge_location,"
          "cmo_hour,dnr_hour,readmit_gap_days,acuity";
    for (int k = 0; k < kNumIcd; ++k) ss << ",icd_" << k;
    ss << "\n";
    for (size_t i = 0; i < ds.records.size(); ++i) {
        const auto& rec = ds.records[i];
        const char* split_name[] = {"train", "tune", "test"};
        ss << rec.id << "," << (rec.sex ? "M" : "F") << ","
           << split_name[static_cast<size_t>(ds.split[i])] << "," << rec.stay_hours << ","
           << rec.outcomes.death_hour << "," << (rec.outcomes.died_in_hospital ? 1 : 0) << ","
           << rec.outcomes.discharge_location << "," << rec.outcomes.cmo_hour << ","
           << rec.outcomes.dnr_hour << "," << rec.outcomes.readmit_gap_days << ","
           << rec.acuity_class();
        for (int k = 0; k < kNumIcd; ++k) ss << "," << ((rec.outcomes.icd_bits >> k) & 1);
        ss << "\n";
    }
}

}  // namespace mtlb
