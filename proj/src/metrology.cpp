#include "fringeforge/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fringeforge/errors.hpp"
#include "fringeforge/geometry.hpp"

namespace fringeforge {

const char* to_string(UncertaintyType type) {
    return type == UncertaintyType::A ? "A" : "B";
}

namespace {

double sample_std(const std::vector<double>& v, double mean) {
    double ss = 0.0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

UncertaintyComponent type_a_uncertainty(const MeasurementSeries& series) {
    const auto n = series.values.size();
    if (n < 2)
        throw InsufficientData("type_a_uncertainty: need at least 2 values, got " +
                               std::to_string(n));
    double mean = 0.0;
    for (const double x : series.values) mean += x;
    mean /= static_cast<double>(n);

    UncertaintyComponent c;
    c.name = series.label;
    c.type = UncertaintyType::A;
    c.u = sample_std(series.values, mean) / std::sqrt(static_cast<double>(n));
    c.note = "type A, n=" + std::to_string(n);
    return c;
}

UncertaintyComponent type_a_from_std(std::string name, double sample_std_mm, int n) {
    if (n < 2) throw InsufficientData("type_a_from_std: need n >= 2");
    if (!(sample_std_mm >= 0.0)) throw DomainError("type_a_from_std: negative deviation");
    UncertaintyComponent c;
    c.name = std::move(name);
    c.type = UncertaintyType::A;
    c.u = sample_std_mm / std::sqrt(static_cast<double>(n));
    c.note = "type A, s=" + std::to_string(sample_std_mm) + ", n=" + std::to_string(n);
    return c;
}

UncertaintyComponent type_b_uniform(std::string name, double half_width) {
    if (!(half_width >= 0.0)) throw DomainError("type_b_uniform: negative half width");
    UncertaintyComponent c;
    c.name = std::move(name);
    c.type = UncertaintyType::B;
    c.u = half_width / std::sqrt(3.0);
    c.note = "type B uniform, a=" + std::to_string(half_width);
    return c;
}

StageUncertainty stage_uncertainty(double s_eff_mm_per_rad, double theta_h_deg,
                                   double stage_resolution_deg) {
    if (!(s_eff_mm_per_rad > 0.0))
        throw DomainError("stage_uncertainty: sensitivity must be positive");
    if (!(theta_h_deg > 0.0))
        throw DomainError("stage_uncertainty: slot interval must be positive");
    if (!(stage_resolution_deg >= 0.0))
        throw DomainError("stage_uncertainty: stage resolution must be non-negative");

    StageUncertainty out;
    if (stage_resolution_deg == 0.0) return out;

    // One stage increment dalpha moves the pattern phase by 2pi*dalpha/theta,
    // which maps to depth through the calibration sensitivity.
    const double dz =
        s_eff_mm_per_rad * (kTwoPi / deg_to_rad(theta_h_deg)) * deg_to_rad(stage_resolution_deg);
    out.dz_eff = dz;
    out.u_stage = dz / std::sqrt(12.0);
    return out;
}

UncertaintyBudget combine_budget(std::vector<UncertaintyComponent> components,
                                 double coverage_factor) {
    if (components.empty()) throw EmptyBudget("combine_budget: no components");
    if (!(coverage_factor > 0.0)) throw DomainError("combine_budget: coverage factor must be > 0");

    double ss = 0.0;
    for (const auto& c : components) {
        if (!(c.u >= 0.0) || !std::isfinite(c.u))
            throw DomainError("combine_budget: component '" + c.name +
                              "' has an invalid standard uncertainty");
        ss += c.u * c.u;
    }

    UncertaintyBudget budget;
    budget.components = std::move(components);
    budget.coverage_factor = coverage_factor;
    budget.combined = std::sqrt(ss);
    budget.expanded = coverage_factor * budget.combined;
    return budget;
}

SeriesSummary series_summary(const MeasurementSeries& series) {
    if (series.values.empty()) throw EmptyInput("series_summary: empty series");

    SeriesSummary s;
    s.count = static_cast<int>(series.values.size());
    s.min = *std::min_element(series.values.begin(), series.values.end());
    s.max = *std::max_element(series.values.begin(), series.values.end());
    double mean = 0.0;
    for (const double x : series.values) mean += x;
    s.mean = mean / s.count;
    s.std_dev = s.count < 2 ? std::numeric_limits<double>::quiet_NaN()
                            : sample_std(series.values, s.mean);
    return s;
}

double round_reported(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(value * scale) / scale;
}

}  // namespace fringeforge
