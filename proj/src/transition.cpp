#include "reachsynth/transition.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace reachsynth {

namespace {

constexpr char kTsMagic[8] = {'R', 'S', 'Y', 'N', 'T', 'S', '0', '1'};

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("transition system file truncated");
  return v;
}

void put_box(std::ostream& os, const Box& b) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(b.dim()));
  for (Eigen::Index i = 0; i < b.dim(); ++i) {
    put<double>(os, b.lo()[i]);
    put<double>(os, b.hi()[i]);
  }
}

Box get_box(std::istream& is) {
  auto dim = get<std::uint32_t>(is);
  Vec lo(dim), hi(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    lo[i] = get<double>(is);
    hi[i] = get<double>(is);
  }
  return Box(lo, hi);
}

}  // namespace

InputGrid::InputGrid(Box domain, VecI values_per_dim, const std::vector<Box>& avoid)
    : domain_(std::move(domain)), values_(std::move(values_per_dim)) {
  if (domain_.is_empty()) throw std::invalid_argument("InputGrid: empty domain");
  if (!domain_.is_bounded()) throw std::invalid_argument("InputGrid: unbounded domain");
  if (values_.size() != domain_.dim())
    throw std::invalid_argument("InputGrid: values_per_dim dimension mismatch");
  const Eigen::Index d = domain_.dim();
  std::int64_t total = 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (values_[i] <= 0) throw std::invalid_argument("InputGrid: values_per_dim must be > 0");
    total *= values_[i];
  }
  points_.reserve(total);
  VecI idx = VecI::Zero(d);
  for (std::int64_t k = 0; k < total; ++k) {
    Vec p(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (values_[i] == 1)
        p[i] = 0.5 * (domain_.lo()[i] + domain_.hi()[i]);
      else
        p[i] = domain_.lo()[i] +
               idx[i] * (domain_.hi()[i] - domain_.lo()[i]) / (values_[i] - 1);
    }
    bool dropped = false;
    for (const Box& a : avoid)
      if (!a.is_empty() && a.contains(p)) {
        dropped = true;
        break;
      }
    if (!dropped) points_.push_back(std::move(p));
    /* row-major increment, dimension 0 slowest */
    for (Eigen::Index i = d - 1; i >= 0; --i) {
      if (++idx[i] < values_[i]) break;
      idx[i] = 0;
    }
  }
  if (points_.empty()) throw std::invalid_argument("InputGrid: avoid boxes exclude every input");
}

InputGrid InputGrid::from_points(Box domain, VecI values_per_dim, std::vector<Vec> points) {
  if (points.empty()) throw std::invalid_argument("InputGrid::from_points: no points");
  InputGrid g;
  g.domain_ = std::move(domain);
  g.values_ = std::move(values_per_dim);
  for (const Vec& p : points)
    if (p.size() != g.domain_.dim())
      throw std::invalid_argument("InputGrid::from_points: point dimension mismatch");
  g.points_ = std::move(points);
  return g;
}

TransitionSystem::SuccSpan TransitionSystem::successors(CellIndex s, int input) const {
  if (s < 0 || s >= grid_.total_cells())
    throw std::out_of_range("TransitionSystem::successors: Out has no outgoing transitions");
  if (!is_safe(s))
    throw std::out_of_range("TransitionSystem::successors: avoid cell is merged into Out");
  if (input < 0 || input >= inputs_.size())
    throw std::out_of_range("TransitionSystem::successors: bad input index");
  std::int64_t pair = s * inputs_.size() + input;
  return SuccSpan(successors_.data() + offsets_[pair],
                  static_cast<size_t>(offsets_[pair + 1] - offsets_[pair]));
}

TransitionSystem build_abstraction(const DecompositionFunction& d, const PartitionGrid& grid,
                                   const InputGrid& inputs, const Box& what,
                                   const ReachSettings& settings,
                                   const std::function<bool(CellIndex)>& avoid_cells,
                                   int threads, std::uint64_t config_hash) {
  TransitionSystem ts;
  ts.grid_ = grid;
  ts.inputs_ = inputs;
  ts.config_hash_ = config_hash;
  const CellIndex n_cells = grid.total_cells();
  const int n_inputs = inputs.size();
  ts.safe_mask_.assign(n_cells, 1);
  for (CellIndex s = 0; s < n_cells; ++s)
    if (avoid_cells && avoid_cells(s)) ts.safe_mask_[s] = 0;

  const std::int32_t out = ts.out_code();
  const CellIndex block_size = 256;
  const CellIndex n_blocks = (n_cells + block_size - 1) / block_size;
  std::vector<std::vector<std::int32_t>> block_succ(n_blocks);
  std::vector<std::vector<std::int64_t>> block_len(n_blocks);
  std::atomic<CellIndex> next_block{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;

  auto worker = [&]() {
    std::vector<std::int32_t> succ;
    for (;;) {
      CellIndex blk = next_block.fetch_add(1);
      if (blk >= n_blocks || failed.load()) return;
      CellIndex s_begin = blk * block_size;
      CellIndex s_end = std::min(n_cells, s_begin + block_size);
      auto& flat = block_succ[blk];
      auto& lens = block_len[blk];
      lens.reserve((s_end - s_begin) * n_inputs);
      for (CellIndex s = s_begin; s < s_end; ++s) {
        if (!ts.safe_mask_[s]) {
          for (int u = 0; u < n_inputs; ++u) lens.push_back(0);
          continue;
        }
        Box cell = grid.cell_box(s);
        for (int u = 0; u < n_inputs; ++u) {
          succ.clear();
          bool exits = false;
          try {
            Box reach = embed_integrate(d, cell, inputs.point(u), what, settings);
            if (!box_contains(grid.domain(), reach)) exits = true;
            if (auto range = grid.intersecting_range(reach)) {
              const auto& [lo, hi] = *range;
              VecI c = lo;
              for (;;) {
                CellIndex idx = grid.flat_of(c);
                if (ts.safe_mask_[idx])
                  succ.push_back(static_cast<std::int32_t>(idx));
                else
                  exits = true;  /* enclosure touches the avoid region */
                Eigen::Index dim = c.size() - 1;
                for (; dim >= 0; --dim) {
                  if (++c[dim] <= hi[dim]) break;
                  c[dim] = lo[dim];
                }
                if (dim < 0) break;
              }
            } else {
              exits = true;
            }
          } catch (const std::exception& ex) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!failed.exchange(true)) {
              std::ostringstream os;
              os << "build_abstraction: cell " << s << ", input " << u << ": " << ex.what();
              error_message = os.str();
            }
            return;
          }
          if (exits) succ.push_back(out);
          lens.push_back(static_cast<std::int64_t>(succ.size()));
          flat.insert(flat.end(), succ.begin(), succ.end());
        }
      }
    }
  };

  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(n_blocks)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw std::runtime_error(error_message);

  /* ordered merge into the row layout */
  ts.offsets_.assign(static_cast<size_t>(n_cells) * n_inputs + 1, 0);
  std::int64_t total = 0;
  for (CellIndex blk = 0; blk < n_blocks; ++blk) {
    CellIndex s_begin = blk * block_size;
    for (size_t k = 0; k < block_len[blk].size(); ++k) {
      total += block_len[blk][k];
      ts.offsets_[static_cast<size_t>(s_begin) * n_inputs + k + 1] = total;
    }
  }
  ts.successors_.reserve(total);
  for (CellIndex blk = 0; blk < n_blocks; ++blk)
    ts.successors_.insert(ts.successors_.end(), block_succ[blk].begin(), block_succ[blk].end());
  return ts;
}

void TransitionSystem::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kTsMagic, sizeof kTsMagic);
  put<std::uint32_t>(os, 1);  /* format version */
  put<std::uint64_t>(os, config_hash_);
  put_box(os, grid_.domain());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid_.cells_per_dim().size()));
  for (Eigen::Index i = 0; i < grid_.cells_per_dim().size(); ++i)
    put<std::uint32_t>(os, static_cast<std::uint32_t>(grid_.cells_per_dim()[i]));
  put_box(os, inputs_.domain());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(inputs_.values_per_dim().size()));
  for (Eigen::Index i = 0; i < inputs_.values_per_dim().size(); ++i)
    put<std::uint32_t>(os, static_cast<std::uint32_t>(inputs_.values_per_dim()[i]));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(inputs_.size()));
  for (const Vec& p : inputs_.points())
    for (Eigen::Index i = 0; i < p.size(); ++i) put<double>(os, p[i]);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(safe_mask_.size()));
  os.write(reinterpret_cast<const char*>(safe_mask_.data()),
           static_cast<std::streamsize>(safe_mask_.size()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(offsets_.size()));
  os.write(reinterpret_cast<const char*>(offsets_.data()),
           static_cast<std::streamsize>(offsets_.size() * sizeof(std::int64_t)));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(successors_.size()));
  os.write(reinterpret_cast<const char*>(successors_.data()),
           static_cast<std::streamsize>(successors_.size() * sizeof(std::int32_t)));
  if (!os) throw std::runtime_error("write failed for " + path);
}

TransitionSystem TransitionSystem::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kTsMagic, sizeof magic) != 0)
    throw std::runtime_error(path + ": not a transition system file");
  auto version = get<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error(path + ": unsupported format version");
  TransitionSystem ts;
  ts.config_hash_ = get<std::uint64_t>(is);
  Box gdom = get_box(is);
  auto gdims = get<std::uint32_t>(is);
  VecI cells(gdims);
  for (std::uint32_t i = 0; i < gdims; ++i) cells[i] = static_cast<int>(get<std::uint32_t>(is));
  ts.grid_ = PartitionGrid(gdom, cells);
  Box idom = get_box(is);
  auto idims = get<std::uint32_t>(is);
  VecI values(idims);
  for (std::uint32_t i = 0; i < idims; ++i) values[i] = static_cast<int>(get<std::uint32_t>(is));
  auto n_points = get<std::uint32_t>(is);
  std::vector<Vec> pts(n_points);
  for (auto& p : pts) {
    p.resize(idims);
    for (std::uint32_t i = 0; i < idims; ++i) p[i] = get<double>(is);
  }
  ts.inputs_ = InputGrid::from_points(idom, values, std::move(pts));
  auto n_mask = get<std::uint64_t>(is);
  ts.safe_mask_.resize(n_mask);
  is.read(reinterpret_cast<char*>(ts.safe_mask_.data()), static_cast<std::streamsize>(n_mask));
  auto n_off = get<std::uint64_t>(is);
  ts.offsets_.resize(n_off);
  is.read(reinterpret_cast<char*>(ts.offsets_.data()),
          static_cast<std::streamsize>(n_off * sizeof(std::int64_t)));
  auto n_succ = get<std::uint64_t>(is);
  ts.successors_.resize(n_succ);
  is.read(reinterpret_cast<char*>(ts.successors_.data()),
          static_cast<std::streamsize>(n_succ * sizeof(std::int32_t)));
  if (!is) throw std::runtime_error(path + ": truncated");
  return ts;
}

void TransitionSystem::write_text(std::ostream& os) const {
  const int n_inputs = inputs_.size();
  for (CellIndex s = 0; s < grid_.total_cells(); ++s) {
    if (!is_safe(s)) continue;
    for (int u = 0; u < n_inputs; ++u) {
      os << s << ' ' << u << " :";
      for (std::int32_t t : successors(s, u)) {
        if (t == out_code())
          os << " Out";
        else
          os << ' ' << t;
      }
      os << '\n';
    }
  }
}

TransitionSystem TransitionSystem::from_lists(
    int n_states, int n_inputs, const std::vector<std::vector<std::vector<std::int32_t>>>& delta) {
  if (static_cast<int>(delta.size()) != n_states)
    throw std::invalid_argument("from_lists: delta size mismatch");
  TransitionSystem ts;
  ts.grid_ = PartitionGrid(Box(Vec::Zero(1), Vec::Constant(1, double(n_states))),
                           VecI::Constant(1, n_states));
  ts.inputs_ = InputGrid(Box(Vec::Zero(1), Vec::Ones(1)), VecI::Constant(1, n_inputs));
  ts.safe_mask_.assign(n_states, 1);
  ts.offsets_.assign(static_cast<size_t>(n_states) * n_inputs + 1, 0);
  for (int s = 0; s < n_states; ++s) {
    if (static_cast<int>(delta[s].size()) != n_inputs)
      throw std::invalid_argument("from_lists: input arity mismatch");
    for (int u = 0; u < n_inputs; ++u) {
      std::vector<std::int32_t> succ = delta[s][u];
      std::sort(succ.begin(), succ.end());
      succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
      for (std::int32_t t : succ)
        if (t < 0 || t > n_states)
          throw std::invalid_argument("from_lists: successor out of range");
      ts.offsets_[static_cast<size_t>(s) * n_inputs + u + 1] =
          ts.offsets_[static_cast<size_t>(s) * n_inputs + u] +
          static_cast<std::int64_t>(succ.size());
      ts.successors_.insert(ts.successors_.end(), succ.begin(), succ.end());
    }
  }
  return ts;
}

}  // namespace reachsynth
