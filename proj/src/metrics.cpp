#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common.hpp"

namespace mtlb {

std::optional<double> auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw UsageError("auroc: size mismatch");
    size_t n = scores.size();
    size_t n_pos = 0;
    for (int l : labels) n_pos += (l != 0);
    size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // midranks over tie groups, 1-based
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]] != 0) pos_rank_sum += midrank;
        i = j + 1;
    }
    double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MacroAuroc macro_auroc(const std::vector<std::vector<double>>& scores,
                       const std::vector<std::vector<int>>& labels) {
    if (scores.size() != labels.size()) throw UsageError("macro_auroc: label count mismatch");
    MacroAuroc out;
    double sum = 0.0;
    int count = 0;
    for (size_t k = 0; k < scores.size(); ++k) {
        auto a = auroc(scores[k], labels[k]);
        out.per_label.push_back(a);
        if (a) {
            sum += *a;
            ++count;
        } else {
            ++out.degenerate;
        }
    }
    if (count > 0) out.macro = sum / count;
    return out;
}

double r_squared(const std::vector<double>& pred, const std::vector<double>& target,
                 const std::vector<double>& mask) {
    if (pred.size() != target.size() || pred.size() != mask.size())
        throw UsageError("r_squared: size mismatch");
    double n = 0.0, mean_t = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        if (mask[i] == 0.0) continue;
        mean_t += target[i];
        n += 1.0;
    }
    if (n == 0.0) return 0.0;
    mean_t /= n;
    double ss_res = 0.0, ss_tot = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        if (mask[i] == 0.0) continue;
        ss_res += (pred[i] - target[i]) * (pred[i] - target[i]);
        ss_tot += (target[i] - mean_t) * (target[i] - mean_t);
    }
    if (ss_tot == 0.0) return 0.0;
    return 1.0 - ss_res / ss_tot;
}

double regression_analog(double r2) {
    if (r2 > 1.0) throw UsageError("regression_analog: R^2 > 1");
    return std::exp2(r2 - 1.0);
}

namespace {
// Continued-fraction evaluation (Lentz) of the regularized incomplete beta.
double betacf(double a, double b, double x) {
    const int max_iter = 300;
    const double eps = 3e-14, fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}
}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_beta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    double front = std::exp(ln_beta + a * std::log(x) + b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - std::exp(ln_beta + b * std::log(1.0 - x) + a * std::log(x)) * betacf(b, a, 1.0 - x) / b;
}

TTest t_test(const std::vector<double>& a, const std::vector<double>& b, bool welch) {
    if (a.size() < 2 || b.size() < 2) throw UsageError("t_test: need n >= 2 per sample");
    double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double ma = mean(a), mb = mean(b);
    double va = 0.0, vb = 0.0;
    for (double v : a) va += (v - ma) * (v - ma);
    for (double v : b) vb += (v - mb) * (v - mb);
    va /= (na - 1.0);
    vb /= (nb - 1.0);

    TTest out;
    if (va == 0.0 && vb == 0.0) {
        if (ma == mb) {
            out.t = 0.0;
            out.df = na + nb - 2.0;
            out.p = 1.0;
            out.significant = false;
            return out;
        }
        out.t = ma > mb ? HUGE_VAL : -HUGE_VAL;
        out.df = na + nb - 2.0;
        out.p = 0.0;
        out.significant = true;
        return out;
    }

    double se2, df;
    if (welch) {
        se2 = va / na + vb / nb;
        double num = se2 * se2;
        double den = (va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0);
        df = num / den;
    } else {
        double sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
        se2 = sp2 * (1.0 / na + 1.0 / nb);
        df = na + nb - 2.0;
    }
    out.t = (ma - mb) / std::sqrt(se2);
    out.df = df;
    double x = df / (df + out.t * out.t);
    out.p = incomplete_beta(df / 2.0, 0.5, x);
    out.significant = out.p < 0.05;
    return out;
}

std::vector<TransferCell> negative_transfer_matrix(
    const std::vector<std::string>& categories,
    const std::map<std::string, std::vector<double>>& mt_scores,
    const std::map<std::string, std::map<std::string, std::vector<double>>>& omit_scores) {
    std::vector<TransferCell> cells;
    for (const auto& t : categories) {
        for (const auto& r : categories) {
            if (t == r) continue;  // diagonal undefined
            TransferCell cell;
            cell.omitted = t;
            cell.reported = r;
            auto mt_it = mt_scores.find(r);
            auto omit_t = omit_scores.find(t);
            if (mt_it != mt_scores.end() && !mt_it->second.empty() && omit_t != omit_scores.end()) {
                auto omit_r = omit_t->second.find(r);
                if (omit_r != omit_t->second.end() && !omit_r->second.empty()) {
                    cell.present = true;
                    cell.n_mt = static_cast<int>(mt_it->second.size());
                    cell.n_omit = static_cast<int>(omit_r->second.size());
                    cell.delta = mean(omit_r->second) - mean(mt_it->second);
                }
            }
            cells.push_back(cell);
        }
    }
    return cells;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw UsageError("mean of empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace mtlb
