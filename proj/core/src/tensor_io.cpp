#include "skilleval/tensor_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "skilleval/errors.hpp"

namespace skilleval {

TensorView view_of(std::string name, Eigen::MatrixXd& m) {
  return {std::move(name), m.data(), m.rows(), m.cols()};
}

TensorView view_of(std::string name, Eigen::VectorXd& v) {
  return {std::move(name), v.data(), v.rows(), 1};
}

TensorView view_of(std::string name, const Eigen::MatrixXd& m) {
  return {std::move(name), const_cast<double*>(m.data()), m.rows(), m.cols()};
}

TensorView view_of(std::string name, const Eigen::VectorXd& v) {
  return {std::move(name), const_cast<double*>(v.data()), v.rows(), 1};
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token, const std::string& context) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw FormatError(context + ": bad numeric token '" + token + "'");
  }
  return v;
}

const NamedTensor* TensorFile::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const Eigen::MatrixXd& TensorFile::require(const std::string& name) const {
  const NamedTensor* t = find(name);
  if (!t) throw FormatError("tensor file missing tensor '" + name + "'");
  return t->value;
}

void write_tensor_file(const std::filesystem::path& path, const std::string& header,
                       const std::string& role, const std::vector<TensorView>& tensors) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << header << '\n';
  if (!role.empty()) out << "role=" << role << '\n';
  out << "tensors=" << tensors.size() << '\n';
  for (const auto& t : tensors) {
    out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
    auto m = t.map();
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index c = 0; c < t.cols; ++c) {
        double v = m(r, c);
        if (!std::isfinite(v)) {
          throw FormatError("non-finite value in tensor '" + t.name + "' while writing " +
                            path.string());
        }
        if (c) out << ' ';
        out << format_double(v);
      }
      out << '\n';
    }
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

TensorFile read_tensor_file(const std::filesystem::path& path, const std::string& expected_header,
                            const std::string& expected_role) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open: " + path.string());
  const std::string where = path.string();

  TensorFile file;
  if (!std::getline(in, file.header)) throw FormatError(where + ": empty file");
  if (file.header != expected_header) {
    throw FormatError(where + ": bad header '" + file.header + "', expected '" + expected_header +
                      "'");
  }

  std::string line;
  if (!std::getline(in, line)) throw FormatError(where + ": truncated after header");
  if (line.rfind("role=", 0) == 0) {
    file.role = line.substr(5);
    if (!std::getline(in, line)) throw FormatError(where + ": truncated after role");
  }
  if (!expected_role.empty() && file.role != expected_role) {
    throw FormatError(where + ": role '" + file.role + "', expected '" + expected_role + "'");
  }
  if (line.rfind("tensors=", 0) != 0) throw FormatError(where + ": missing tensors= line");
  std::size_t count = 0;
  try {
    count = std::stoul(line.substr(8));
  } catch (const std::exception&) {
    throw FormatError(where + ": bad tensors= line '" + line + "'");
  }

  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw FormatError(where + ": truncated tensor table");
    std::istringstream head(line);
    std::string kw, name;
    Eigen::Index rows = -1, cols = -1;
    head >> kw >> name >> rows >> cols;
    if (kw != "tensor" || name.empty() || rows < 0 || cols < 0 || head.fail()) {
      throw FormatError(where + ": bad tensor line '" + line + "'");
    }
    NamedTensor t{name, Eigen::MatrixXd(rows, cols)};
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) {
        throw FormatError(where + ": truncated tensor '" + name + "' at row " + std::to_string(r));
      }
      std::istringstream row(line);
      std::string tok;
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(row >> tok)) {
          throw FormatError(where + ": tensor '" + name + "' row " + std::to_string(r) +
                            " has fewer than " + std::to_string(cols) + " values");
        }
        t.value(r, c) = parse_double(tok, where + ": tensor '" + name + "'");
      }
      std::string extra;
      if (row >> extra) {
        throw FormatError(where + ": tensor '" + name + "' row " + std::to_string(r) +
                          " has trailing data");
      }
    }
    file.tensors.push_back(std::move(t));
  }
  return file;
}

}  // namespace skilleval
