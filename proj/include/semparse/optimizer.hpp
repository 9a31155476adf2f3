#ifndef SEMPARSE_OPTIMIZER_HPP
#define SEMPARSE_OPTIMIZER_HPP

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace semparse {

// Rescales g so that its L2 norm is at most max_norm. Returns the norm before clipping.
inline double clip_by_global_norm(Eigen::VectorXd& g, double max_norm) {
  if (!(max_norm > 0)) throw std::invalid_argument("clip norm must be positive");
  const double n = g.norm();
  if (n > max_norm) g *= max_norm / n;
  return n;
}

// Adadelta for minimization.
class adadelta {
 public:
  explicit adadelta(double rho = 0.95, double eps = 1e-6, double learning_rate = 1.0)
      : rho_(rho), eps_(eps), lr_(learning_rate) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
    if (eg2_.size() != theta.size()) {
      eg2_ = Eigen::VectorXd::Zero(theta.size());
      edx2_ = Eigen::VectorXd::Zero(theta.size());
    }
    eg2_ = rho_ * eg2_.array() + (1 - rho_) * grad.array().square();
    Eigen::VectorXd dx = -((edx2_.array() + eps_).sqrt() / (eg2_.array() + eps_).sqrt() * grad.array()).matrix();
    edx2_ = rho_ * edx2_.array() + (1 - rho_) * dx.array().square();
    theta += lr_ * dx;
  }

 private:
  double rho_, eps_, lr_;
  Eigen::VectorXd eg2_, edx2_;
};

}  // namespace semparse

#endif  // SEMPARSE_OPTIMIZER_HPP
