#include "tutoreval/stats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "tutoreval/common/errors.hpp"

namespace tutoreval::stats {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_size(const std::vector<double>& xs, std::size_t n, const char* what) {
    if (xs.size() < n) {
        throw DegenerateError(std::string(what) + " needs at least " + std::to_string(n) + " values, got " +
                              std::to_string(xs.size()));
    }
}

}  // namespace

double mean(const std::vector<double>& xs) {
    require_size(xs, 1, "mean");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    require_size(xs, 2, "variance");
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

double sample_sd(const std::vector<double>& xs) { return std::sqrt(sample_variance(xs)); }

double normal_two_sided_p(double z) {
    if (std::isinf(z)) return 0.0;
    const boost::math::normal dist;
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(z)));
}

double t_two_sided_p(double t, double df) {
    if (std::isinf(t)) return 0.0;
    const boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

double f_upper_p(double f, double df1, double df2) {
    if (std::isinf(f)) return 0.0;
    if (f <= 0.0) return 1.0;
    const boost::math::fisher_f dist(df1, df2);
    return boost::math::cdf(boost::math::complement(dist, f));
}

double chi2_upper_p(double chi2, double df) {
    if (chi2 <= 0.0) return 1.0;
    const boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, chi2));
}

std::string_view to_string(EffectClass value) {
    switch (value) {
        case EffectClass::negligible: return "negligible";
        case EffectClass::small: return "small";
        case EffectClass::medium: return "medium";
        case EffectClass::large: return "large";
    }
    return "unknown";
}

EffectClass classify_effect(double d) {
    const double magnitude = std::fabs(d);
    if (magnitude < 0.2) return EffectClass::negligible;
    if (magnitude < 0.5) return EffectClass::small;
    if (magnitude <= 0.8) return EffectClass::medium;
    return EffectClass::large;
}

EffectSize cohens_d(const std::vector<double>& group1, const std::vector<double>& group2) {
    require_size(group1, 2, "cohens_d group 1");
    require_size(group2, 2, "cohens_d group 2");
    const double n1 = static_cast<double>(group1.size());
    const double n2 = static_cast<double>(group2.size());
    const double pooled =
        std::sqrt(((n1 - 1) * sample_variance(group1) + (n2 - 1) * sample_variance(group2)) / (n1 + n2 - 2));
    if (pooled == 0.0) {
        throw DegenerateError("cohens_d: pooled standard deviation is zero");
    }
    EffectSize out;
    out.d = (mean(group1) - mean(group2)) / pooled;
    out.n1 = group1.size();
    out.n2 = group2.size();
    const double se = std::sqrt((n1 + n2) / (n1 * n2) + out.d * out.d / (2 * (n1 + n2)));
    const double z = boost::math::quantile(boost::math::normal(), 0.975);
    out.ci_low = out.d - z * se;
    out.ci_high = out.d + z * se;
    out.classification = classify_effect(out.d);
    return out;
}

TTest welch_t(const std::vector<double>& group1, const std::vector<double>& group2) {
    require_size(group1, 2, "welch_t group 1");
    require_size(group2, 2, "welch_t group 2");
    const double n1 = static_cast<double>(group1.size());
    const double n2 = static_cast<double>(group2.size());
    const double q1 = sample_variance(group1) / n1;
    const double q2 = sample_variance(group2) / n2;
    const double se = std::sqrt(q1 + q2);
    if (se == 0.0) {
        throw DegenerateError("welch_t: both groups have zero variance");
    }
    TTest out;
    out.t = (mean(group1) - mean(group2)) / se;
    out.df = (q1 + q2) * (q1 + q2) / (q1 * q1 / (n1 - 1) + q2 * q2 / (n2 - 1));
    out.p = t_two_sided_p(out.t, out.df);
    return out;
}

Correlation pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw DegenerateError("pearson_r: x and y differ in length");
    }
    require_size(x, 3, "pearson_r");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DegenerateError("pearson_r: zero variance");
    }
    Correlation out;
    out.n = x.size();
    out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(out.n) - 2;
    const double denom = 1.0 - out.r * out.r;
    out.t = denom <= 0.0 ? std::copysign(kInf, out.r) : out.r * std::sqrt(df / denom);
    out.p = t_two_sided_p(out.t, df);
    return out;
}

LinearFit ols_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) {
        throw DegenerateError("ols_slope needs at least two points");
    }
    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0) {
        throw DegenerateError("ols_slope needs at least two distinct x values");
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (points.size() > 2) {
        double sse = 0.0;
        for (const auto& [x, y] : points) {
            const double r = y - (fit.intercept + fit.slope * x);
            sse += r * r;
        }
        fit.se_slope = std::sqrt(sse / (n - 2) / sxx);
    }
    return fit;
}

namespace {

struct DesignFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtx_inverse;
    double sse = 0.0;
    std::size_t df_residual = 0;
};

DesignFit fit_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() <= X.cols()) {
        throw DesignError("regression has no residual degrees of freedom");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < X.cols()) {
        throw DesignError("design matrix is rank deficient");
    }
    DesignFit fit;
    fit.beta = qr.solve(y);
    fit.sse = (y - X * fit.beta).squaredNorm();
    fit.df_residual = static_cast<std::size_t>(X.rows() - X.cols());
    const Eigen::MatrixXd xtx = X.transpose() * X;
    fit.xtx_inverse = xtx.ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    return fit;
}

}  // namespace

Regression linear_regression(const std::vector<std::vector<double>>& predictors, const std::vector<double>& y) {
    const auto n = static_cast<Eigen::Index>(y.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(predictors.size()) + 1);
    X.col(0).setOnes();
    for (std::size_t k = 0; k < predictors.size(); ++k) {
        if (predictors[k].size() != y.size()) {
            throw DegenerateError("linear_regression: predictor length differs from outcome length");
        }
        X.col(static_cast<Eigen::Index>(k) + 1) = Eigen::Map<const Eigen::VectorXd>(predictors[k].data(), n);
    }
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    const auto fit = fit_design(X, yv);
    Regression out;
    out.sse = fit.sse;
    out.df_residual = fit.df_residual;
    const double sigma2 = fit.sse / static_cast<double>(fit.df_residual);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        out.coefficients.push_back(fit.beta(j));
        out.std_errors.push_back(std::sqrt(sigma2 * fit.xtx_inverse(j, j)));
    }
    const double sst = (yv.array() - yv.mean()).square().sum();
    out.r_squared = sst == 0.0 ? 0.0 : 1.0 - fit.sse / sst;
    return out;
}

const AnovaEffect& AnovaResult::effect(const std::string& name) const {
    for (const auto& e : effects) {
        if (e.name == name) return e;
    }
    throw DesignError("no ANOVA effect named '" + name + "'");
}

AnovaResult anova_factorial(const std::vector<AnovaObservation>& rows, const std::vector<std::string>& factor_names) {
    const std::size_t k = factor_names.size();
    if (k < 1 || k > 3) {
        throw DesignError("anova_factorial supports one to three binary factors");
    }
    std::vector<std::size_t> cell_counts(std::size_t{1} << k, 0);
    for (const auto& row : rows) {
        if (row.levels.size() != k) {
            throw DesignError("observation has " + std::to_string(row.levels.size()) + " factor levels, expected " +
                              std::to_string(k));
        }
        std::size_t cell = 0;
        for (std::size_t f = 0; f < k; ++f) {
            if (row.levels[f] != 0 && row.levels[f] != 1) {
                throw DesignError("factor levels must be 0 or 1");
            }
            cell |= static_cast<std::size_t>(row.levels[f]) << f;
        }
        ++cell_counts[cell];
    }
    for (std::size_t cell = 0; cell < cell_counts.size(); ++cell) {
        if (cell_counts[cell] == 0) {
            std::string label;
            for (std::size_t f = 0; f < k; ++f) {
                label += (f ? "," : "") + factor_names[f] + "=" + std::to_string((cell >> f) & 1);
            }
            throw DesignError("empty design cell (" + label + ")");
        }
    }

    // Terms are non-empty factor subsets ordered by size, then lexicographically.
    std::vector<std::size_t> terms;
    for (std::size_t size = 1; size <= k; ++size) {
        for (std::size_t mask = 1; mask < (std::size_t{1} << k); ++mask) {
            if (static_cast<std::size_t>(__builtin_popcountll(mask)) == size) terms.push_back(mask);
        }
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(terms.size()) + 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        y(i) = row.value;
        X(i, 0) = 1.0;
        for (std::size_t t = 0; t < terms.size(); ++t) {
            double code = 1.0;
            for (std::size_t f = 0; f < k; ++f) {
                if (terms[t] & (std::size_t{1} << f)) code *= row.levels[f] == 1 ? 1.0 : -1.0;
            }
            X(i, static_cast<Eigen::Index>(t) + 1) = code;
        }
    }
    const auto fit = fit_design(X, y);

    AnovaResult result;
    result.ss_total = (y.array() - y.mean()).square().sum();
    result.ss_residual = fit.sse;
    result.df_residual = static_cast<double>(fit.df_residual);
    const double ms_residual = fit.sse / result.df_residual;
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const auto j = static_cast<Eigen::Index>(t) + 1;
        AnovaEffect e;
        for (std::size_t f = 0; f < k; ++f) {
            if (terms[t] & (std::size_t{1} << f)) e.name += (e.name.empty() ? "" : ":") + factor_names[f];
        }
        // Type III SS for a one-df term: the drop-one increase in SSE, in closed form.
        e.ss = fit.beta(j) * fit.beta(j) / fit.xtx_inverse(j, j);
        if (e.ss == 0.0) {
            e.f = 0.0;
        } else if (ms_residual == 0.0) {
            e.f = kInf;
        } else {
            e.f = e.ss / ms_residual;
        }
        e.p = f_upper_p(e.f, 1.0, result.df_residual);
        e.eta_squared = result.ss_total == 0.0 ? 0.0 : std::min(1.0, e.ss / result.ss_total);
        e.partial_eta_squared = e.ss + fit.sse == 0.0 ? 0.0 : e.ss / (e.ss + fit.sse);
        result.effects.push_back(std::move(e));
    }
    return result;
}

MediationResult mediation(const std::vector<double>& x, const std::vector<double>& m, const std::vector<double>& y) {
    if (x.size() != m.size() || x.size() != y.size()) {
        throw DegenerateError("mediation: x, m and y differ in length");
    }
    if (x.size() < 10) {
        throw DegenerateError("mediation needs at least 10 observations");
    }
    const auto total = linear_regression({x}, y);
    const auto a_path = linear_regression({x}, m);
    const auto full = linear_regression({x, m}, y);

    MediationResult out;
    out.c = {total.coefficients[1], total.std_errors[1]};
    out.a = {a_path.coefficients[1], a_path.std_errors[1]};
    out.c_prime = {full.coefficients[1], full.std_errors[1]};
    out.b = {full.coefficients[2], full.std_errors[2]};
    out.indirect = out.a.estimate * out.b.estimate;
    out.proportion_mediated = out.c.estimate == 0.0 ? 0.0 : out.indirect / out.c.estimate;
    const double sobel_se = std::sqrt(out.b.estimate * out.b.estimate * out.a.se * out.a.se +
                                      out.a.estimate * out.a.estimate * out.b.se * out.b.se);
    out.sobel_z = sobel_se == 0.0 ? (out.indirect == 0.0 ? 0.0 : std::copysign(kInf, out.indirect))
                                  : out.indirect / sobel_se;
    out.sobel_p = normal_two_sided_p(out.sobel_z);
    out.delta_r2 = full.r_squared - total.r_squared;
    return out;
}

WithinResponseResult within_response_sd(const std::vector<ResponseDimensions>& responses,
                                        const std::string& treatment_group, const std::string& control_group) {
    WithinResponseResult out;
    for (const auto& response : responses) {
        require_size(response.scores, 2, "within-response SD");
        auto& group = out.groups[response.group];
        group.sds.push_back(sample_sd(response.scores));
        ++group.n;
    }
    for (auto& [name, group] : out.groups) {
        group.mean_sd = mean(group.sds);
    }
    auto treatment = out.groups.find(treatment_group);
    auto control = out.groups.find(control_group);
    if (treatment != out.groups.end() && control != out.groups.end() && treatment->second.n >= 2 &&
        control->second.n >= 2) {
        out.effect = cohens_d(treatment->second.sds, control->second.sds);
    }
    return out;
}

InteractionDecomposition interaction_decompose(const CellMeans& means) {
    InteractionDecomposition out;
    out.recog_single_delta = means.recog_single - means.base_single;
    out.recog_multi_delta = means.recog_multi - means.base_multi;
    out.multi_base_delta = means.base_multi - means.base_single;
    out.multi_recog_delta = means.recog_multi - means.recog_single;
    out.interaction = out.multi_recog_delta - out.multi_base_delta;
    out.expected_additive = means.base_single + out.recog_single_delta + out.multi_base_delta;
    out.additivity_deficit = out.expected_additive - means.recog_multi;
    if (out.expected_additive == 0.0) {
        throw DegenerateError("interaction_decompose: additive expectation is zero");
    }
    out.deficit_pct = out.additivity_deficit / out.expected_additive * 100.0;
    return out;
}

ChiSquare chi_square(const std::vector<std::vector<double>>& observed) {
    if (observed.size() < 2 || observed.front().size() < 2) {
        throw DegenerateError("chi_square needs at least a 2x2 table");
    }
    const std::size_t cols = observed.front().size();
    std::vector<double> row_totals(observed.size(), 0.0);
    std::vector<double> col_totals(cols, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < observed.size(); ++r) {
        if (observed[r].size() != cols) {
            throw DegenerateError("chi_square table rows differ in length");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (observed[r][c] < 0) throw DegenerateError("chi_square counts must be nonnegative");
            row_totals[r] += observed[r][c];
            col_totals[c] += observed[r][c];
            total += observed[r][c];
        }
    }
    ChiSquare out;
    for (std::size_t r = 0; r < observed.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double expected = total == 0.0 ? 0.0 : row_totals[r] * col_totals[c] / total;
            if (expected <= 0.0) {
                throw DegenerateError("chi_square: expected count is zero at row " + std::to_string(r) +
                                      ", column " + std::to_string(c));
            }
            const double diff = observed[r][c] - expected;
            out.chi2 += diff * diff / expected;
        }
    }
    out.df = static_cast<double>((observed.size() - 1) * (cols - 1));
    out.p = chi2_upper_p(out.chi2, out.df);
    return out;
}

TrajectoryMetrics trajectory_metrics(const std::vector<double>& scores) {
    if (scores.size() < 2) {
        throw DegenerateError("trajectory_metrics needs at least two turns");
    }
    const std::size_t n = scores.size();
    std::vector<std::pair<double, double>> points;
    for (std::size_t t = 0; t < n; ++t) points.emplace_back(static_cast<double>(t), scores[t]);

    TrajectoryMetrics out;
    out.slope = ols_slope(points).slope;
    out.development = scores.back() - scores.front();
    out.dip = scores[0] - scores[1];
    if (n >= 3) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 3);
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        for (std::size_t t = 0; t < n; ++t) {
            const double x = static_cast<double>(t);
            X.row(static_cast<Eigen::Index>(t)) << 1.0, x, x * x;
            y(static_cast<Eigen::Index>(t)) = scores[t];
        }
        const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
        out.curvature = beta(2);
    }
    if (n == 5 || n == 6) {
        const std::size_t block = std::min<std::size_t>(3, n / 2);
        const std::vector<double> head(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(block));
        const std::vector<double> tail(scores.end() - static_cast<std::ptrdiff_t>(block), scores.end());
        out.half_split_delta = mean(tail) - mean(head);
    }
    return out;
}

double min_detectable_d(std::size_t n_per_group, double alpha, double power) {
    if (n_per_group < 2) {
        throw DegenerateError("min_detectable_d needs at least two observations per group");
    }
    const boost::math::normal dist;
    const double z_alpha = boost::math::quantile(dist, 1.0 - alpha / 2.0);
    const double z_power = boost::math::quantile(dist, power);
    return (z_alpha + z_power) * std::sqrt(2.0 / static_cast<double>(n_per_group));
}

}  // namespace tutoreval::stats
