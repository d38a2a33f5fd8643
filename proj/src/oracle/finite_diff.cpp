#include "attdmm/oracle/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "attdmm/numcore/errors.hpp"

namespace attdmm::oracle {

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  require(h > 0.0, "fd_gradient: step must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

Weights<Tensor> fd_gradient(const std::function<double(const ModelParams&)>& loss,
                            const ModelParams& params, double h) {
  require(h > 0.0, "fd_gradient: step must be positive");
  if (loss(params) != loss(params)) {
    throw ContractViolation("fd_gradient: loss is not reproducible at fixed seeds");
  }
  ModelParams probe = params;
  Weights<Tensor> grad = zeros_like(params.weights);
  Weights<Tensor>::visit(
      [&](std::string_view, Tensor& p, Tensor& g) {
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          const double orig = p(i);
          p(i) = orig + h;
          const double up = loss(probe);
          p(i) = orig - h;
          const double down = loss(probe);
          p(i) = orig;
          g(i) = (up - down) / (2.0 * h);
        }
      },
      probe.weights, grad);
  return grad;
}

GradientComparison compare_gradients(const Weights<Tensor>& a, const Weights<Tensor>& b) {
  GradientComparison out;
  Weights<Tensor>::visit(
      [&out](std::string_view name, const Tensor& ga, const Tensor& gb) {
        require(ga.rows() == gb.rows() && ga.cols() == gb.cols(),
                "compare_gradients: layout mismatch");
        GroupError e;
        e.name = std::string(name);
        const double diff = (ga - gb).norm();
        const double scale = std::max(ga.norm(), gb.norm());
        e.relative_error = scale < 1e-12 ? diff : diff / scale;
        e.max_abs_error = ga.size() == 0 ? 0.0 : (ga - gb).cwiseAbs().maxCoeff();
        if (e.relative_error >= out.max_relative_error) {
          out.max_relative_error = e.relative_error;
          out.worst_group = e.name;
        }
        out.groups.push_back(std::move(e));
      },
      a, b);
  return out;
}

}  // namespace attdmm::oracle
