#include "wde/dyadic_table.hpp"

#include <algorithm>
#include <utility>

#include "wde/error.hpp"

namespace wde {

std::string_view to_string(FunctionTag tag) {
  switch (tag) {
    case FunctionTag::phi: return "phi";
    case FunctionTag::psi: return "psi";
    case FunctionTag::phi_primitive: return "phi_primitive";
    case FunctionTag::psi_primitive: return "psi_primitive";
    case FunctionTag::density: return "density";
    case FunctionTag::cdf: return "cdf";
    case FunctionTag::generic: return "generic";
  }
  return "generic";
}

DyadicTable::DyadicTable(int resolution, double origin, std::vector<double> values,
                         FunctionTag tag, bool step)
    : resolution(resolution), origin(origin), values(std::move(values)), tag(tag), step(step) {
  if (resolution < 0) throw Error(ErrorKind::invalid_argument, "negative table resolution");
  if (this->values.empty()) throw Error(ErrorKind::invalid_argument, "empty dyadic table");
}

double DyadicTable::nearest(double x) const {
  const double pos = std::ldexp(x - origin, resolution);
  const double m = std::nearbyint(pos);
  if (m < 0.0 || m > static_cast<double>(values.size() - 1)) return 0.0;
  return values[static_cast<std::size_t>(m)];
}

double DyadicTable::interpolate_clamped(double x) const {
  const double pos = std::ldexp(x - origin, resolution);
  if (pos <= 0.0) return pos == 0.0 ? values.front() : 0.0;
  const double last = static_cast<double>(values.size() - 1);
  if (pos >= last) return values.back();
  const auto m = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(m);
  return (1.0 - w) * values[m] + w * values[m + 1];
}

double DyadicTable::interpolate(double x) const {
  const double pos = std::ldexp(x - origin, resolution);
  const double last = static_cast<double>(values.size() - 1);
  if (pos < 0.0 || pos > last) return 0.0;
  if (pos == last) return values.back();
  const auto m = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(m);
  return (1.0 - w) * values[m] + w * values[m + 1];
}

double trapezoid(std::span<const double> values, double spacing) {
  if (values.size() < 2) return 0.0;
  double sum = 0.5 * (values.front() + values.back());
  for (std::size_t m = 1; m + 1 < values.size(); ++m) sum += values[m];
  return sum * spacing;
}

double DyadicTable::integral() const {
  if (step) {
    double sum = 0.0;
    for (std::size_t m = 1; m < values.size(); ++m) sum += values[m];
    return sum * spacing();
  }
  return trapezoid(values, spacing());
}

double DyadicTable::max_value() const { return *std::max_element(values.begin(), values.end()); }
double DyadicTable::min_value() const { return *std::min_element(values.begin(), values.end()); }

double DyadicTable::max_abs() const {
  double best = 0.0;
  for (double v : values) best = std::max(best, std::abs(v));
  return best;
}

std::vector<double> cumulative_integral(const DyadicTable& table) {
  const double h = table.spacing();
  std::vector<double> out(table.size(), 0.0);
  for (std::size_t m = 1; m < table.size(); ++m) {
    const double piece = table.step ? h * table.values[m]
                                    : 0.5 * h * (table.values[m - 1] + table.values[m]);
    out[m] = out[m - 1] + piece;
  }
  return out;
}

}  // namespace wde
