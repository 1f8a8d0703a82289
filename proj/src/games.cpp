#include "reachsynth/games.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace reachsynth {

namespace {

constexpr char kCtMagic[8] = {'R', 'S', 'Y', 'N', 'C', 'T', '0', '1'};

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("controller file truncated");
  return v;
}

void validate_spec(const TransitionSystem& ts, const std::vector<CellIndex>& cells,
                   const std::vector<int>& inputs) {
  for (CellIndex s : cells)
    if (s < 0 || s >= ts.grid().total_cells() || !ts.is_safe(s))
      throw std::invalid_argument("game: target cell out of range or unsafe");
  for (int u : inputs)
    if (u < 0 || u >= ts.inputs().size())
      throw std::invalid_argument("game: input index out of range");
}

}  // namespace

SafetyResult solve_safety(const TransitionSystem& ts, const GameSpec& spec) {
  validate_spec(ts, spec.target_cells, spec.stay_inputs);
  const CellIndex n = ts.grid().total_cells();
  SafetyResult res;
  res.in_s.assign(n, 0);
  res.choice.assign(n, -1);
  for (CellIndex s : spec.target_cells) res.in_s[s] = 1;

  auto has_witness = [&](CellIndex s) -> int {
    for (int u : spec.stay_inputs) {
      bool inside = true;
      for (std::int32_t t : ts.successors(s, u))
        if (t == ts.out_code() || !res.in_s[t]) {
          inside = false;
          break;
        }
      if (inside) return u;
    }
    return -1;
  };

  std::vector<CellIndex> current = spec.target_cells;
  bool changed = true;
  while (changed) {
    changed = false;
    ++res.iterations;
    std::vector<CellIndex> survivors;
    survivors.reserve(current.size());
    for (CellIndex s : current) {
      if (has_witness(s) >= 0)
        survivors.push_back(s);
      else {
        res.in_s[s] = 0;
        changed = true;
      }
    }
    if (survivors.size() > current.size())
      throw std::logic_error("solve_safety: iteration not decreasing");
    current = std::move(survivors);
  }
  for (CellIndex s : current) res.choice[s] = has_witness(s);
  return res;
}

ReachResult solve_reach(const TransitionSystem& ts, const std::vector<CellIndex>& seed,
                        const std::vector<int>& inputs) {
  validate_spec(ts, seed, inputs);
  const CellIndex n = ts.grid().total_cells();
  const int n_inputs = ts.inputs().size();
  ReachResult res;
  res.in_r.assign(n, 0);
  res.choice.assign(n, -1);
  res.rank.assign(n, -1);

  /* per-(cell,input) count of successors not yet in R; pairs with an Out
   * successor can never fire */
  std::vector<std::int32_t> pending(static_cast<size_t>(n) * inputs.size(), -1);
  std::vector<std::vector<std::pair<CellIndex, int>>> preds(n);
  for (CellIndex s = 0; s < n; ++s) {
    if (!ts.is_safe(s)) continue;
    for (size_t ui = 0; ui < inputs.size(); ++ui) {
      auto succ = ts.successors(s, inputs[ui]);
      bool blocked = false;
      for (std::int32_t t : succ)
        if (t == ts.out_code()) {
          blocked = true;
          break;
        }
      if (blocked) continue;
      pending[static_cast<size_t>(s) * inputs.size() + ui] =
          static_cast<std::int32_t>(succ.size());
      for (std::int32_t t : succ) preds[t].emplace_back(s, static_cast<int>(ui));
    }
  }

  std::vector<CellIndex> wave;
  for (CellIndex s : seed) {
    if (res.in_r[s]) continue;
    res.in_r[s] = 1;
    res.rank[s] = 0;
    wave.push_back(s);
  }
  std::sort(wave.begin(), wave.end());
  std::int64_t r_size = static_cast<std::int64_t>(wave.size());

  int k = 0;
  while (!wave.empty()) {
    ++k;
    ++res.iterations;
    std::vector<std::pair<CellIndex, int>> fired;
    for (CellIndex t : wave)
      for (auto [p, ui] : preds[t]) {
        std::int32_t& c = pending[static_cast<size_t>(p) * inputs.size() + ui];
        if (c > 0 && --c == 0 && !res.in_r[p]) fired.emplace_back(p, ui);
      }
    std::sort(fired.begin(), fired.end());
    std::vector<CellIndex> next;
    for (auto [p, ui] : fired) {
      if (res.in_r[p]) continue;  /* smaller input index already fired for p */
      res.in_r[p] = 1;
      res.rank[p] = k;
      res.choice[p] = inputs[ui];
      next.push_back(p);
    }
    r_size += static_cast<std::int64_t>(next.size());
    wave = std::move(next);
  }
  (void)r_size;
  return res;
}

ReachResult solve_reach_rescan(const TransitionSystem& ts, const std::vector<CellIndex>& seed,
                               const std::vector<int>& inputs) {
  validate_spec(ts, seed, inputs);
  const CellIndex n = ts.grid().total_cells();
  ReachResult res;
  res.in_r.assign(n, 0);
  res.choice.assign(n, -1);
  res.rank.assign(n, -1);
  for (CellIndex s : seed) {
    res.in_r[s] = 1;
    res.rank[s] = 0;
  }
  std::int64_t size = static_cast<std::int64_t>(seed.size());
  bool grown = true;
  int k = 0;
  while (grown) {
    grown = false;
    ++k;
    ++res.iterations;
    std::vector<std::pair<CellIndex, int>> additions;
    for (CellIndex s = 0; s < n; ++s) {
      if (res.in_r[s] || !ts.is_safe(s)) continue;
      for (int u : inputs) {
        bool inside = true;
        for (std::int32_t t : ts.successors(s, u))
          if (t == ts.out_code() || !res.in_r[t]) {
            inside = false;
            break;
          }
        if (inside) {
          additions.emplace_back(s, u);
          break;  /* inputs scanned in ascending order: first hit is min */
        }
      }
    }
    std::int64_t before = size;
    for (auto [s, u] : additions) {
      res.in_r[s] = 1;
      res.rank[s] = k;
      res.choice[s] = u;
      ++size;
      grown = true;
    }
    if (size < before) throw std::logic_error("solve_reach_rescan: iteration not increasing");
  }
  return res;
}

std::int64_t ControllerTable::stay_count() const {
  return std::count(in_s.begin(), in_s.end(), std::uint8_t{1});
}

std::int64_t ControllerTable::win_count() const {
  return std::count(in_r.begin(), in_r.end(), std::uint8_t{1});
}

double ControllerTable::coverage() const {
  return n_cells > 0 ? static_cast<double>(win_count()) / static_cast<double>(n_cells) : 0.0;
}

ControllerTable extract_controller(const SafetyResult& safety, const ReachResult& reach,
                                   const TransitionSystem& ts) {
  ControllerTable table;
  table.n_cells = ts.grid().total_cells();
  table.n_inputs = ts.inputs().size();
  table.config_hash = ts.config_hash();
  table.in_r = reach.in_r;
  table.rank = reach.rank;
  table.choice = reach.choice;
  table.in_s.assign(table.n_cells, 0);
  if (!safety.in_s.empty()) {
    if (static_cast<CellIndex>(safety.in_s.size()) != table.n_cells)
      throw std::invalid_argument("extract_controller: safety result size mismatch");
    table.in_s = safety.in_s;
    for (CellIndex s = 0; s < table.n_cells; ++s)
      if (safety.in_s[s]) table.choice[s] = safety.choice[s];
  }
  return table;
}

void ControllerTable::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kCtMagic, sizeof kCtMagic);
  put<std::uint32_t>(os, 1);
  put<std::uint64_t>(os, config_hash);
  put<std::int64_t>(os, n_cells);
  put<std::int32_t>(os, n_inputs);
  os.write(reinterpret_cast<const char*>(in_s.data()), n_cells);
  os.write(reinterpret_cast<const char*>(in_r.data()), n_cells);
  os.write(reinterpret_cast<const char*>(choice.data()),
           static_cast<std::streamsize>(n_cells * sizeof(std::int32_t)));
  os.write(reinterpret_cast<const char*>(rank.data()),
           static_cast<std::streamsize>(n_cells * sizeof(std::int32_t)));
  if (!os) throw std::runtime_error("write failed for " + path);
}

ControllerTable ControllerTable::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kCtMagic, sizeof magic) != 0)
    throw std::runtime_error(path + ": not a controller file");
  if (get<std::uint32_t>(is) != 1) throw std::runtime_error(path + ": unsupported version");
  ControllerTable t;
  t.config_hash = get<std::uint64_t>(is);
  t.n_cells = get<std::int64_t>(is);
  t.n_inputs = get<std::int32_t>(is);
  t.in_s.resize(t.n_cells);
  t.in_r.resize(t.n_cells);
  t.choice.resize(t.n_cells);
  t.rank.resize(t.n_cells);
  is.read(reinterpret_cast<char*>(t.in_s.data()), t.n_cells);
  is.read(reinterpret_cast<char*>(t.in_r.data()), t.n_cells);
  is.read(reinterpret_cast<char*>(t.choice.data()),
          static_cast<std::streamsize>(t.n_cells * sizeof(std::int32_t)));
  is.read(reinterpret_cast<char*>(t.rank.data()),
          static_cast<std::streamsize>(t.n_cells * sizeof(std::int32_t)));
  if (!is) throw std::runtime_error(path + ": truncated");
  return t;
}

void ControllerTable::write_text(std::ostream& os) const {
  for (CellIndex s = 0; s < n_cells; ++s) {
    if (!in_r[s]) continue;
    os << s << " rank " << rank[s] << " choice " << choice[s] << (in_s[s] ? " S" : "") << '\n';
  }
}

}  // namespace reachsynth
