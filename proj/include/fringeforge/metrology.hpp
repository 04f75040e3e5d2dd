#pragma once

#include <string>
#include <vector>

namespace fringeforge {

struct MeasurementSeries {
    std::string label;
    std::vector<double> values;  // mm
};

enum class UncertaintyType { A, B };

const char* to_string(UncertaintyType type);

struct UncertaintyComponent {
    std::string name;
    std::string symbol;
    UncertaintyType type = UncertaintyType::A;
    double u = 0.0;  // standard uncertainty, mm
    std::string note;
};

struct UncertaintyBudget {
    std::vector<UncertaintyComponent> components;
    double coverage_factor = 2.0;
    double combined = 0.0;  // u_c, root sum of squares, unrounded
    double expanded = 0.0;  // U = k * u_c, computed from the unrounded u_c
};

struct SeriesSummary {
    double mean = 0.0;
    double std_dev = 0.0;  // sample standard deviation (n-1); NaN when n < 2
    double min = 0.0;
    double max = 0.0;
    int count = 0;
};

struct StageUncertainty {
    double u_stage = 0.0;  // mm
    double dz_eff = 0.0;   // full-width depth quantization step, mm
};

/// Type A evaluation of a repeated series: u = s / sqrt(n) with s the sample
/// standard deviation. Throws InsufficientData for n < 2.
UncertaintyComponent type_a_uncertainty(const MeasurementSeries& series);

/// Type A evaluation given published statistics (sample std s over n runs).
UncertaintyComponent type_a_from_std(std::string name, double sample_std, int n);

/// Type B evaluation of a uniform (rectangular) bound: u = a / sqrt(3).
UncertaintyComponent type_b_uniform(std::string name, double half_width);

/// Depth uncertainty contributed by the rotation stage's angular resolution:
///   dz_eff  = S_eff * (2pi / theta_h) * dalpha          (angles in radians)
///   u_stage = dz_eff / sqrt(12)                          (uniform quantization)
/// Angles are taken in degrees; dalpha = 0 yields exact zeros.
StageUncertainty stage_uncertainty(double s_eff_mm_per_rad, double theta_h_deg,
                                   double stage_resolution_deg);

/// Root-sum-of-squares combination plus expanded uncertainty. Combination
/// does not round; chaining U from a pre-rounded u_c is the caller's choice.
UncertaintyBudget combine_budget(std::vector<UncertaintyComponent> components,
                                 double coverage_factor);

/// Mean / sample STD / min / max of a series. Throws EmptyInput on an empty
/// series; std_dev is NaN when only one value is present.
SeriesSummary series_summary(const MeasurementSeries& series);

/// Reporting precision used in the emitted tables: round half away from zero
/// to `decimals` places.
double round_reported(double value, int decimals = 3);

}  // namespace fringeforge
