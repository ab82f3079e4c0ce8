#include "reco/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "reco/rng.hpp"

namespace reco {

Tensor2D& ParameterGroup::add(const std::string& tname, Tensor2D init) {
  for (const auto& t : tensors)
    if (t.name == tname)
      throw std::invalid_argument("duplicate tensor name: " + tname);
  NamedTensor nt;
  nt.name = tname;
  nt.grad = Tensor2D(init.rows(), init.cols(), 0.0);
  nt.value = std::move(init);
  tensors.push_back(std::move(nt));
  return tensors.back().value;
}

NamedTensor& ParameterGroup::find(const std::string& tname) {
  for (auto& t : tensors)
    if (t.name == tname) return t;
  throw std::out_of_range("no tensor named " + tname + " in group " + name);
}

const NamedTensor& ParameterGroup::find(const std::string& tname) const {
  for (const auto& t : tensors)
    if (t.name == tname) return t;
  throw std::out_of_range("no tensor named " + tname + " in group " + name);
}

ParameterGroup& ParameterSet::add_group(const std::string& name) {
  if (has_group(name)) throw std::invalid_argument("duplicate group: " + name);
  groups_.push_back(ParameterGroup{name, {}});
  return groups_.back();
}

ParameterGroup& ParameterSet::group(const std::string& name) {
  for (auto& g : groups_)
    if (g.name == name) return g;
  throw std::out_of_range("no parameter group named " + name);
}

const ParameterGroup& ParameterSet::group(const std::string& name) const {
  for (const auto& g : groups_)
    if (g.name == name) return g;
  throw std::out_of_range("no parameter group named " + name);
}

bool ParameterSet::has_group(const std::string& name) const {
  for (const auto& g : groups_)
    if (g.name == name) return true;
  return false;
}

void ParameterSet::zero_grads() {
  for (auto& g : groups_)
    for (auto& t : g.tensors) t.grad.fill(0.0);
}

bool ParameterSet::same_structure(const ParameterSet& o) const {
  if (groups_.size() != o.groups_.size()) return false;
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    const auto& a = groups_[i];
    const auto& b = o.groups_[i];
    if (a.name != b.name || a.tensors.size() != b.tensors.size()) return false;
    for (std::size_t j = 0; j < a.tensors.size(); ++j) {
      if (a.tensors[j].name != b.tensors[j].name) return false;
      if (!a.tensors[j].value.same_shape(b.tensors[j].value)) return false;
    }
  }
  return true;
}

std::size_t ParameterSet::param_count(
    const std::vector<std::string>& plan) const {
  std::size_t n = 0;
  for (const auto& g : groups_) {
    if (!plan.empty()) {
      bool in_plan = false;
      for (const auto& p : plan)
        if (p == g.name) in_plan = true;
      if (!in_plan) continue;
    }
    for (const auto& t : g.tensors) n += t.value.size();
  }
  return n;
}

namespace {

constexpr char kMagic[] = "RPSET1";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out.append(s);
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

std::string get_string(const std::string& in, std::size_t& pos) {
  std::uint64_t n = get_u64(in, pos);
  if (pos + n > in.size()) throw std::runtime_error("checkpoint truncated");
  std::string s = in.substr(pos, n);
  pos += n;
  return s;
}

} // namespace

std::string serialize_parameters(const ParameterSet& ps) {
  std::string out;
  out.append(kMagic, 6);
  put_u64(out, ps.groups().size());
  for (const auto& g : ps.groups()) {
    put_string(out, g.name);
    put_u64(out, g.tensors.size());
    for (const auto& t : g.tensors) {
      put_string(out, t.name);
      put_u64(out, t.value.rows());
      put_u64(out, t.value.cols());
      const std::size_t nbytes = t.value.size() * sizeof(double);
      const std::size_t off = out.size();
      out.resize(off + nbytes);
      std::memcpy(out.data() + off, t.value.data(), nbytes);
    }
  }
  return out;
}

ParameterSet deserialize_parameters(const std::string& bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 6) != 0)
    throw std::runtime_error("not a parameter checkpoint");
  std::size_t pos = 6;
  ParameterSet ps;
  const std::uint64_t ngroups = get_u64(bytes, pos);
  for (std::uint64_t gi = 0; gi < ngroups; ++gi) {
    auto& g = ps.add_group(get_string(bytes, pos));
    const std::uint64_t ntensors = get_u64(bytes, pos);
    for (std::uint64_t ti = 0; ti < ntensors; ++ti) {
      std::string tname = get_string(bytes, pos);
      const std::uint64_t rows = get_u64(bytes, pos);
      const std::uint64_t cols = get_u64(bytes, pos);
      Tensor2D t(rows, cols);
      const std::size_t nbytes = t.size() * sizeof(double);
      if (pos + nbytes > bytes.size())
        throw std::runtime_error("checkpoint truncated");
      std::memcpy(t.data(), bytes.data() + pos, nbytes);
      pos += nbytes;
      g.add(tname, std::move(t));
    }
  }
  return ps;
}

void save_parameters(const ParameterSet& ps, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  const std::string bytes = serialize_parameters(ps);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

ParameterSet load_parameters(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  return deserialize_parameters(bytes);
}

void fill_xavier_uniform(Tensor2D& t, std::uint64_t seed) {
  auto eng = make_engine(seed);
  const double limit =
      std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
  std::uniform_real_distribution<double> u(-limit, limit);
  double* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) p[i] = u(eng);
}

void fill_normal(Tensor2D& t, double mean, double stddev, std::uint64_t seed) {
  auto eng = make_engine(seed);
  std::normal_distribution<double> n(mean, stddev);
  double* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) p[i] = n(eng);
}

} // namespace reco
