#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tutoreval::stats {

double mean(const std::vector<double>& xs);
/// Sample variance (n - 1 denominator).
double sample_variance(const std::vector<double>& xs);
double sample_sd(const std::vector<double>& xs);

enum class EffectClass { negligible, small, medium, large };
std::string_view to_string(EffectClass value);
EffectClass classify_effect(double d);

struct EffectSize {
    double d = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    EffectClass classification = EffectClass::negligible;
};

/// (mean1 - mean2) / pooled SD with a normal-approximation 95% interval.
EffectSize cohens_d(const std::vector<double>& group1, const std::vector<double>& group2);

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
};

TTest welch_t(const std::vector<double>& group1, const std::vector<double>& group2);

struct Correlation {
    double r = 0.0;
    double t = 0.0;
    double p = 1.0;
    std::size_t n = 0;
};

Correlation pearson_r(const std::vector<double>& x, const std::vector<double>& y);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::optional<double> se_slope;  // absent with only two points
};

LinearFit ols_slope(const std::vector<std::pair<double, double>>& points);

/// Least squares with an intercept column prepended to `predictors`
/// (predictors[k] is the k-th regressor over all observations).
struct Regression {
    std::vector<double> coefficients;  // intercept first
    std::vector<double> std_errors;
    double r_squared = 0.0;
    double sse = 0.0;
    std::size_t df_residual = 0;
};

Regression linear_regression(const std::vector<std::vector<double>>& predictors, const std::vector<double>& y);

struct AnovaObservation {
    std::vector<int> levels;  // 0 or 1 per factor
    double value = 0.0;
};

struct AnovaEffect {
    std::string name;  // "A", "A:B", ...
    double ss = 0.0;
    double df = 1.0;
    double f = 0.0;
    double p = 1.0;
    double eta_squared = 0.0;          // ss / ss_total
    double partial_eta_squared = 0.0;  // ss / (ss + ss_residual)
};

struct AnovaResult {
    std::vector<AnovaEffect> effects;  // main effects, then 2-way, then 3-way
    double ss_total = 0.0;
    double ss_residual = 0.0;
    double df_residual = 0.0;

    const AnovaEffect& effect(const std::string& name) const;
};

/// Effect-coded (-1/+1) OLS over up to three binary factors with every
/// interaction; each term is tested against the full model (Type III).
/// Throws DesignError for an empty design cell or no residual df.
AnovaResult anova_factorial(const std::vector<AnovaObservation>& rows, const std::vector<std::string>& factor_names);

struct PathEstimate {
    double estimate = 0.0;
    double se = 0.0;
};

struct MediationResult {
    PathEstimate c;        // total effect, y ~ x
    PathEstimate a;        // m ~ x
    PathEstimate b;        // m coefficient in y ~ x + m
    PathEstimate c_prime;  // x coefficient in y ~ x + m
    double indirect = 0.0;
    double proportion_mediated = 0.0;
    double sobel_z = 0.0;
    double sobel_p = 1.0;
    double delta_r2 = 0.0;
};

MediationResult mediation(const std::vector<double>& x, const std::vector<double>& m, const std::vector<double>& y);

struct ResponseDimensions {
    std::string group;
    std::vector<double> scores;
};

struct GroupSpread {
    std::size_t n = 0;
    double mean_sd = 0.0;
    std::vector<double> sds;
};

struct WithinResponseResult {
    std::map<std::string, GroupSpread> groups;
    std::optional<EffectSize> effect;  // cohens_d(treatment SDs, control SDs)
};

/// Sample SD across each response's dimension scores, grouped.
WithinResponseResult within_response_sd(const std::vector<ResponseDimensions>& responses,
                                        const std::string& treatment_group, const std::string& control_group);

struct CellMeans {
    double base_single = 0.0;
    double base_multi = 0.0;
    double recog_single = 0.0;
    double recog_multi = 0.0;
};

struct InteractionDecomposition {
    double recog_single_delta = 0.0;  // RS - BS
    double recog_multi_delta = 0.0;   // RM - MB
    double multi_base_delta = 0.0;    // MB - BS
    double multi_recog_delta = 0.0;   // RM - RS
    double interaction = 0.0;
    double expected_additive = 0.0;
    double additivity_deficit = 0.0;
    double deficit_pct = 0.0;  // percent of the additive expectation
};

InteractionDecomposition interaction_decompose(const CellMeans& means);

struct ChiSquare {
    double chi2 = 0.0;
    double df = 0.0;
    double p = 1.0;
};

/// Pearson chi-square on a rows x columns contingency table.
ChiSquare chi_square(const std::vector<std::vector<double>>& observed);

struct TrajectoryMetrics {
    double slope = 0.0;
    double curvature = 0.0;  // quadratic coefficient; 0 with fewer than three turns
    double development = 0.0;
    std::optional<double> half_split_delta;  // 5-6 turn dialogues only
    double dip = 0.0;                        // T0 - T1
};

TrajectoryMetrics trajectory_metrics(const std::vector<double>& per_turn_scores);

/// Smallest d detectable by a two-sided two-sample z approximation with n per group.
double min_detectable_d(std::size_t n_per_group, double alpha = 0.05, double power = 0.8);

double normal_two_sided_p(double z);
double t_two_sided_p(double t, double df);
double f_upper_p(double f, double df1, double df2);
double chi2_upper_p(double chi2, double df);

}  // namespace tutoreval::stats
