#include "cloakopt/control.hpp"

#include "cloakopt/errors.hpp"

namespace cloakopt {

ControlField ControlField::zeros(std::size_t n) { return constant(n, 0.0, 0.0, 0.0); }

ControlField ControlField::constant(std::size_t n, double u, double f, double v) {
  const auto m = static_cast<Eigen::Index>(n);
  return {Eigen::VectorXd::Constant(m, u), Eigen::VectorXd::Constant(m, f), Eigen::VectorXd::Constant(m, v)};
}

bool ControlField::same_shape(const ControlField& other) const {
  return u.size() == other.u.size() && f.size() == other.f.size() && v.size() == other.v.size() &&
         u.size() == f.size() && u.size() == v.size();
}

bool ControlField::operator==(const ControlField& other) const {
  return same_shape(other) && u == other.u && f == other.f && v == other.v;
}

Eigen::VectorXd flatten(const ControlTrajectory& ctrl) {
  const Eigen::Index n = ctrl.empty() ? 0 : static_cast<Eigen::Index>(ctrl.front().size());
  Eigen::VectorXd x(3 * n * static_cast<Eigen::Index>(ctrl.size()));
  Eigen::Index off = 0;
  for (const auto& c : ctrl) {
    if (static_cast<Eigen::Index>(c.size()) != n || !c.same_shape(c)) {
      throw InvalidArgument("flatten: control slices differ in size");
    }
    x.segment(off, n) = c.u;
    x.segment(off + n, n) = c.f;
    x.segment(off + 2 * n, n) = c.v;
    off += 3 * n;
  }
  return x;
}

ControlTrajectory unflatten(const Eigen::VectorXd& x, std::size_t slices, std::size_t nodes) {
  const auto n = static_cast<Eigen::Index>(nodes);
  if (x.size() != 3 * n * static_cast<Eigen::Index>(slices)) throw InvalidArgument("unflatten: wrong length");
  ControlTrajectory out(slices);
  for (std::size_t s = 0; s < slices; ++s) {
    const Eigen::Index off = 3 * n * static_cast<Eigen::Index>(s);
    out[s].u = x.segment(off, n);
    out[s].f = x.segment(off + n, n);
    out[s].v = x.segment(off + 2 * n, n);
  }
  return out;
}

}  // namespace cloakopt
