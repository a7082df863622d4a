#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace skilleval {

// Mutable view over one named parameter tensor. Optimizer steps, gradient
// checks and checkpoints all walk the same ordered view list of a network,
// so parameter order is pinned in exactly one place per network type.
struct TensorView {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  Eigen::Map<Eigen::MatrixXd> map() { return {data, rows, cols}; }
  Eigen::Map<const Eigen::MatrixXd> map() const { return {data, rows, cols}; }
};

TensorView view_of(std::string name, Eigen::MatrixXd& m);
TensorView view_of(std::string name, Eigen::VectorXd& v);
// Serialization of const objects: write_tensor_file never writes through
// a view, so these are safe as long as the result is only handed to it.
TensorView view_of(std::string name, const Eigen::MatrixXd& m);
TensorView view_of(std::string name, const Eigen::VectorXd& v);

// Shortest round-trip-exact decimal rendering (std::to_chars).
std::string format_double(double v);
double parse_double(const std::string& token, const std::string& context);

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

struct TensorFile {
  std::string header;
  std::string role;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  // Same but throws FormatError when absent.
  const Eigen::MatrixXd& require(const std::string& name) const;
};

// Versioned text container: header line, optional "role=<tag>" line,
// "tensors=<n>", then per tensor a "tensor <name> <rows> <cols>" line
// followed by <rows> lines of <cols> values. Values are written with
// round-trip-exact precision; non-finite values are refused.
void write_tensor_file(const std::filesystem::path& path, const std::string& header,
                       const std::string& role, const std::vector<TensorView>& tensors);

// Reads and validates; expected_header must match the file's first line and
// expected_role (when non-empty) the role tag.
TensorFile read_tensor_file(const std::filesystem::path& path, const std::string& expected_header,
                            const std::string& expected_role = "");

}  // namespace skilleval
