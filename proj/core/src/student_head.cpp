#include <random>

#include "reactkd/error.hpp"
#include "reactkd/nets.hpp"

namespace reactkd {

StudentHead StudentHead::init(int inputs, int classes, std::uint64_t seed, double scale) {
  require(inputs > 0 && classes > 0, ErrorKind::kInvalidArgument, "head needs positive sizes");
  StudentHead h;
  h.weight.resize(classes, inputs);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (Eigen::Index i = 0; i < h.weight.size(); ++i) h.weight.data()[i] = n(rng);
  h.bias = Eigen::VectorXd::Zero(classes);
  return h;
}

Eigen::VectorXd student_head_forward(const Eigen::VectorXd& stats, const StudentHead& head) {
  require(stats.size() == head.weight.cols(), ErrorKind::kInvalidArgument,
          "head input length " + std::to_string(stats.size()) + " does not match " +
              std::to_string(head.weight.cols()));
  return head.weight * stats + head.bias;
}

HeadGradient student_head_backward(const Eigen::VectorXd& stats, const Eigen::VectorXd& grad_logits) {
  return {grad_logits * stats.transpose(), grad_logits};
}

Eigen::VectorXd student_head_input_gradient(const StudentHead& head, const Eigen::VectorXd& grad_logits) {
  require(grad_logits.size() == head.weight.rows(), ErrorKind::kInvalidArgument,
          "logit gradient length does not match the head");
  return head.weight.transpose() * grad_logits;
}

}  // namespace reactkd
