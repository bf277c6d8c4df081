#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mtlb {

// Rank-based AUROC (Mann-Whitney with midranks for ties); equals
// P(score+ > score-) + 0.5 P(tie). Returns nullopt when only one class is
// present (degenerate label).
std::optional<double> auroc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MacroAuroc {
    std::optional<double> macro;                     // mean over non-degenerate labels
    std::vector<std::optional<double>> per_label;    // nullopt = degenerate, excluded
    int degenerate = 0;
};

// One score/label column per label (multi-label or one-vs-rest multiclass).
MacroAuroc macro_auroc(const std::vector<std::vector<double>>& scores,
                       const std::vector<std::vector<int>>& labels);

// R^2 over mask-valid entries; 0 when the target has no variance.
double r_squared(const std::vector<double>& pred, const std::vector<double>& target,
                 const std::vector<double>& mask);

// AUROC analog for the regression task: 2^(R^2 - 1).
double regression_analog(double r2);

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    bool significant = false;  // p < 0.05
};

// Two-sided Welch by default; equal-variance Student's behind the flag.
TTest t_test(const std::vector<double>& a, const std::vector<double>& b, bool welch = true);

// Regularized incomplete beta, exposed for the t-distribution oracle tests.
double incomplete_beta(double a, double b, double x);

// Delta(t, r) = mean_seeds M_not_t(r) - mean_seeds M(r) for omitted task t and
// reported task r. Positive means omission helped, i.e. t transfers negatively.
struct TransferCell {
    std::string omitted;
    std::string reported;
    bool present = false;  // false = runs missing, no imputation
    double delta = 0.0;
    int n_mt = 0;
    int n_omit = 0;
};

std::vector<TransferCell> negative_transfer_matrix(
    const std::vector<std::string>& categories,
    const std::map<std::string, std::vector<double>>& mt_scores,
    const std::map<std::string, std::map<std::string, std::vector<double>>>& omit_scores);

double mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);  // n-1 denominator; 0 for n<2

}  // namespace mtlb
