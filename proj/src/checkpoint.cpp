#include "bsde/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace bsde {

namespace {

constexpr char kMagic[8] = {'B', 'S', 'D', 'E', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::int64_t read_i64(std::istream& in) {
  std::int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  write_i64(out, t.rows);
  write_i64(out, t.cols);
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& in) {
  const std::int64_t r = read_i64(in), c = read_i64(in);
  if (r < 0 || c < 0 || r * c > (1ll << 32)) throw std::runtime_error("checkpoint: bad tensor header");
  Tensor t(r, c);
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  return t;
}

}  // namespace

void save_policy(const std::string& file, const SolverPolicy& policy, std::uint64_t seed) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("save_policy: cannot open " + file);
  out.write(kMagic, sizeof kMagic);
  write_u64(out, seed);
  write_i64(out, policy.layout == InputLayout::xy ? 0 : 1);
  write_tensor(out, policy.mu0);
  write_i64(out, static_cast<std::int64_t>(policy.subnets.size()));
  for (const auto& net : policy.subnets) {
    write_i64(out, net.spec.input_dim);
    write_i64(out, net.spec.output_dim);
    write_i64(out, static_cast<std::int64_t>(net.spec.hidden.size()));
    for (auto h : net.spec.hidden) write_i64(out, h);
    write_i64(out, net.spec.batchnorm ? 1 : 0);
    for (const auto& layer : net.layers) {
      write_tensor(out, layer.W);
      write_tensor(out, layer.b);
      write_tensor(out, layer.bn.gamma);
      write_tensor(out, layer.bn.beta);
      write_tensor(out, layer.bn.running_mean);
      write_tensor(out, layer.bn.running_var);
    }
  }
  if (!out) throw std::runtime_error("save_policy: write failed for " + file);
}

SolverPolicy load_policy(const std::string& file, std::uint64_t* seed_out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("load_policy: cannot open " + file);
  char magic[8];
  in.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("load_policy: not a policy checkpoint: " + file);
  const std::uint64_t seed = read_u64(in);
  if (seed_out) *seed_out = seed;
  SolverPolicy p;
  p.layout = read_i64(in) == 0 ? InputLayout::xy : InputLayout::x_only;
  p.mu0 = read_tensor(in);
  const std::int64_t n = read_i64(in);
  for (std::int64_t s = 0; s < n; ++s) {
    SubnetParams net;
    net.spec.input_dim = read_i64(in);
    net.spec.output_dim = read_i64(in);
    const std::int64_t nh = read_i64(in);
    for (std::int64_t i = 0; i < nh; ++i) net.spec.hidden.push_back(read_i64(in));
    net.spec.batchnorm = read_i64(in) != 0;
    for (std::int64_t l = 0; l < nh + 1; ++l) {
      DenseLayer layer;
      layer.W = read_tensor(in);
      layer.b = read_tensor(in);
      layer.bn.gamma = read_tensor(in);
      layer.bn.beta = read_tensor(in);
      layer.bn.running_mean = read_tensor(in);
      layer.bn.running_var = read_tensor(in);
      net.layers.push_back(std::move(layer));
    }
    p.subnets.push_back(std::move(net));
  }
  if (!in) throw std::runtime_error("load_policy: truncated file " + file);
  return p;
}

}  // namespace bsde
