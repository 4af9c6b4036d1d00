#include "dpre/partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "transfer.hpp"

namespace dpre::partition {
namespace {

const char kMagic[8] = {'D', 'P', 'R', 'E', 'L', 'W', 'F', '\0'};

Box point_box(const LatticePoint& p) { return Box::around(p, 0); }

}  // namespace

double hamiltonian(const env::EnvironmentField& field, const walk::WalkPath& path) {
  double h = 0.0;
  for (int i = 1; i <= path.length(); ++i) h += field.eta_at(i, path[i]);
  return h;
}

PartitionResult log_partition(const env::EnvironmentField& field, double beta, int n, const LatticePoint& start) {
  if (n < 1) throw PreconditionError("log_partition needs n >= 1");
  detail::TransferRun run;
  run.core = point_box(start);
  run.n = n;
  const auto t = detail::run_transfer(field, beta, run, true);
  PartitionResult r;
  r.log_w = beta == 0.0 ? 0.0 : t.log_total[static_cast<std::size_t>(n)];
  r.weights.n = n;
  r.weights.start = start;
  r.weights.box = t.box;
  r.weights.log_total = r.log_w;
  r.weights.log_w.resize(t.final_values.size());
  for (std::size_t i = 0; i < t.final_values.size(); ++i)
    r.weights.log_w[i] = t.final_values[i] > 0.0 ? std::log(t.final_values[i]) + t.final_offset : kNegInf;
  return r;
}

std::vector<double> log_partition_profile(const env::EnvironmentField& field, double beta, int n,
                                          const LatticePoint& start) {
  if (n < 1) throw PreconditionError("log_partition_profile needs n >= 1");
  if (beta == 0.0) {
    field.require(1, n, Box::around(start, n));
    return std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0);
  }
  detail::TransferRun run;
  run.core = point_box(start);
  run.n = n;
  return detail::run_transfer(field, beta, run, false).log_total;
}

std::vector<double> gibbs_measure(const LogWeightField& weights) {
  double shift = kNegInf;
  for (double v : weights.log_w) shift = std::max(shift, v);
  if (!std::isfinite(shift)) throw DegenerateInput("gibbs_measure: no finite weight in the field");
  std::vector<double> mu(weights.log_w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    mu[i] = std::exp(weights.log_w[i] - shift);
    total += mu[i];
  }
  for (double& v : mu) v /= total;
  return mu;
}

void LogWeightField::dump(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const std::uint32_t version = kFormatVersion;
  const std::int32_t head[2] = {box.d, n};
  std::int32_t lohi[6];
  for (int k = 0; k < 3; ++k) {
    lohi[k] = box.lo[k];
    lohi[3 + k] = box.hi[k];
  }
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(head), sizeof head);
  out.write(reinterpret_cast<const char*>(lohi), sizeof lohi);
  out.write(reinterpret_cast<const char*>(&log_total), sizeof log_total);
  out.write(reinterpret_cast<const char*>(log_w.data()), static_cast<std::streamsize>(log_w.size() * sizeof(double)));
  if (!out) throw Error("failed writing " + path);
}

LogWeightField LogWeightField::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::int32_t head[2];
  std::int32_t lohi[6];
  LogWeightField f;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(head), sizeof head);
  in.read(reinterpret_cast<char*>(lohi), sizeof lohi);
  in.read(reinterpret_cast<char*>(&f.log_total), sizeof f.log_total);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || version != kFormatVersion)
    throw Error(path + " is not a weight-field dump");
  if (head[0] < 1 || head[0] > kMaxDim) throw Error(path + " has an invalid dimension");
  f.box.d = head[0];
  f.n = head[1];
  for (int k = 0; k < 3; ++k) {
    f.box.lo[k] = lohi[k];
    f.box.hi[k] = lohi[3 + k];
  }
  f.start = LatticePoint(f.box.d);
  for (int k = 0; k < f.box.d; ++k) f.start.x[k] = (f.box.lo[k] + f.box.hi[k]) / 2;
  f.log_w.resize(f.box.count());
  in.read(reinterpret_cast<char*>(f.log_w.data()), static_cast<std::streamsize>(f.log_w.size() * sizeof(double)));
  if (!in) throw Error(path + " is truncated");
  return f;
}

BlockPath::BlockPath(std::vector<LatticePoint> b) : blocks(std::move(b)) {
  if (blocks.empty()) throw PreconditionError("a block path needs at least one block");
  for (const auto& z : blocks)
    if (z.d != blocks.front().d) throw PreconditionError("block path mixes dimensions");
}

bool is_feasible(const BoxSpec& spec, const LatticePoint& start, const BlockPath& z) {
  if (z.size() == 0 || z.blocks.front().d != spec.d() || start.d != spec.d()) return false;
  if (l1_distance(point_box(start), spec.range(z.blocks[0])) > spec.N()) return false;
  for (int j = 1; j < z.size(); ++j)
    if (l1_distance(spec.range(z.blocks[j - 1]), spec.range(z.blocks[j])) > spec.N()) return false;
  return true;
}

std::vector<BlockPath> enumerate_block_paths(const BoxSpec& spec, const LatticePoint& start, int n_blocks) {
  if (n_blocks < 1) throw PreconditionError("enumerate_block_paths needs n_blocks >= 1");
  const int d = spec.d();
  const int reach = spec.N() / spec.width() + 2;
  std::vector<BlockPath> out;
  std::vector<LatticePoint> cur;
  auto candidates = [&](const LatticePoint& centre, const Box& from) {
    std::vector<LatticePoint> c;
    Box::around(centre, reach).for_each([&](const LatticePoint& z) {
      if (l1_distance(from, spec.range(z)) <= spec.N()) c.push_back(z);
    });
    return c;
  };
  auto rec = [&](auto&& self, const LatticePoint& centre, const Box& from) -> void {
    for (const auto& z : candidates(centre, from)) {
      cur.push_back(z);
      if (static_cast<int>(cur.size()) == n_blocks) out.emplace_back(cur);
      else self(self, z, spec.range(z));
      cur.pop_back();
    }
  };
  (void)d;
  rec(rec, spec.block_of(start), point_box(start));
  return out;
}

CoarseResult coarse_partition(const env::EnvironmentField& field, double beta, const BoxSpec& spec,
                              const BlockPath& z, const LatticePoint& start) {
  CoarseResult r;
  if (!is_feasible(spec, start, z)) return r;
  detail::TransferRun run;
  run.core = point_box(start);
  run.n = z.size() * spec.N();
  for (int j = 0; j < z.size(); ++j) run.masks.emplace_back((j + 1) * spec.N(), spec.range(z.blocks[j]));
  const auto t = detail::run_transfer(field, beta, run, false);
  r.log_w = t.log_total.back();
  r.feasible = std::isfinite(r.log_w);
  return r;
}

}  // namespace dpre::partition
