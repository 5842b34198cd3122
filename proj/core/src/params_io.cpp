#include "json.hpp"
#include "reactkd/error.hpp"
#include "reactkd/nets.hpp"

namespace reactkd {

using json = nlohmann::ordered_json;

std::string params_to_json(const ParamStore& store) {
  json j = json::object();
  for (const auto& [name, arr] : store) {
    json e;
    e["shape"] = arr.shape;
    e["data"] = arr.data;
    j[name] = std::move(e);
  }
  return j.dump(1) + "\n";
}

ParamStore params_from_json(const std::string& text) {
  ParamStore store;
  try {
    const json j = json::parse(text);
    for (const auto& [name, e] : j.items()) {
      NamedArray a{e.at("shape").get<std::vector<int>>(), e.at("data").get<std::vector<double>>()};
      std::size_t expect = 1;
      for (int s : a.shape) {
        if (s < 0) fail(ErrorKind::kFormat, "parameter '" + name + "' has a negative extent");
        expect *= static_cast<std::size_t>(s);
      }
      if (expect != a.data.size())
        fail(ErrorKind::kFormat, "parameter '" + name + "' data does not match its shape");
      store.emplace(name, std::move(a));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("parameter file: ") + e.what());
  }
  return store;
}

namespace {

const NamedArray& lookup(const ParamStore& s, const std::string& name, std::size_t rank) {
  const auto it = s.find(name);
  if (it == s.end()) fail(ErrorKind::kFormat, "parameter '" + name + "' is missing");
  if (it->second.shape.size() != rank)
    fail(ErrorKind::kFormat, "parameter '" + name + "' has rank " + std::to_string(it->second.shape.size()) +
                                 ", expected " + std::to_string(rank));
  return it->second;
}

}  // namespace

void store_matrix(ParamStore& s, const std::string& name, const Eigen::MatrixXd& m) {
  NamedArray a{{static_cast<int>(m.rows()), static_cast<int>(m.cols())}, {}};
  a.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.data.push_back(m(r, c));
  s[name] = std::move(a);
}

Eigen::MatrixXd load_matrix(const ParamStore& s, const std::string& name) {
  const NamedArray& a = lookup(s, name, 2);
  Eigen::MatrixXd m(a.shape[0], a.shape[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.data[static_cast<std::size_t>(r * m.cols() + c)];
  return m;
}

void store_vector(ParamStore& s, const std::string& name, const Eigen::VectorXd& v) {
  s[name] = {{static_cast<int>(v.size())}, std::vector<double>(v.data(), v.data() + v.size())};
}

Eigen::VectorXd load_vector(const ParamStore& s, const std::string& name) {
  const NamedArray& a = lookup(s, name, 1);
  return Eigen::Map<const Eigen::VectorXd>(a.data.data(), static_cast<Eigen::Index>(a.data.size()));
}

void store_conv(ParamStore& s, const std::string& prefix, const Conv3d& c) {
  s[prefix + ".weight"] = {{c.out_channels, c.in_channels, c.kernel, c.kernel, c.kernel}, c.weights};
  s[prefix + ".bias"] = {{c.out_channels}, c.bias};
  s[prefix + ".stride"] = {{1}, {static_cast<double>(c.stride)}};
}

Conv3d load_conv(const ParamStore& s, const std::string& prefix) {
  const NamedArray& w = lookup(s, prefix + ".weight", 5);
  const NamedArray& b = lookup(s, prefix + ".bias", 1);
  const NamedArray& st = lookup(s, prefix + ".stride", 1);
  if (w.shape[2] != w.shape[3] || w.shape[2] != w.shape[4])
    fail(ErrorKind::kFormat, "parameter '" + prefix + "' kernel is not cubic");
  Conv3d c;
  c.out_channels = w.shape[0];
  c.in_channels = w.shape[1];
  c.kernel = w.shape[2];
  c.stride = static_cast<int>(st.data.at(0));
  c.weights = w.data;
  c.bias = b.data;
  c.validate();
  return c;
}

void store_cbam(ParamStore& s, const std::string& prefix, const CbamParams& p) {
  s[prefix + ".reduction"] = {{1}, {static_cast<double>(p.reduction)}};
  store_matrix(s, prefix + ".w1", p.w1);
  store_vector(s, prefix + ".b1", p.b1);
  store_matrix(s, prefix + ".w2", p.w2);
  store_vector(s, prefix + ".b2", p.b2);
  store_conv(s, prefix + ".spatial", p.spatial);
}

CbamParams load_cbam(const ParamStore& s, const std::string& prefix) {
  CbamParams p;
  p.reduction = static_cast<int>(lookup(s, prefix + ".reduction", 1).data.at(0));
  p.w1 = load_matrix(s, prefix + ".w1");
  p.b1 = load_vector(s, prefix + ".b1");
  p.w2 = load_matrix(s, prefix + ".w2");
  p.b2 = load_vector(s, prefix + ".b2");
  p.spatial = load_conv(s, prefix + ".spatial");
  return p;
}

void store_head(ParamStore& s, const std::string& prefix, const StudentHead& h) {
  store_matrix(s, prefix + ".weight", h.weight);
  store_vector(s, prefix + ".bias", h.bias);
}

StudentHead load_head(const ParamStore& s, const std::string& prefix) {
  StudentHead h{load_matrix(s, prefix + ".weight"), load_vector(s, prefix + ".bias")};
  require(h.bias.size() == h.weight.rows(), ErrorKind::kFormat, "head bias does not match its weight");
  return h;
}

}  // namespace reactkd
