#include "reachsynth/refine.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace reachsynth {

std::int64_t period_index(double t, double t_s) {
  /* sampling grids in this project are integer multiples of the step, so
   * a half-ulp nudge settles points landing exactly on k T_s */
  return static_cast<std::int64_t>(std::floor(t / t_s * (1.0 + 1e-13) + 1e-13));
}

Vec zoh_control(const HierarchicalController& hc, double t, const Vec& xhat, SampleLatch& latch) {
  std::int64_t k = period_index(t, hc.t_s);
  if (k != latch.period) {
    CellIndex cell = hc.grid.cell_of(xhat);
    if (cell == hc.grid.out_index() || !hc.table.in_r[cell]) {
      std::ostringstream os;
      os << "zoh_control: abstract state left the winning set at t = " << t << " (cell "
         << cell << ")";
      throw std::runtime_error(os.str());
    }
    if (!hc.table.has_choice(cell)) {
      std::ostringstream os;
      os << "zoh_control: cell " << cell << " is terminal (rank 0, no table input) at t = " << t;
      throw std::runtime_error(os.str());
    }
    Vec next = hc.inputs.point(hc.table.choice[cell]);
    if (latch.period >= 0) {
      /* clamp the input jump into the admissible jump box */
      Vec du = next - latch.uhat;
      const Box& dbox = hc.cert.domains.delta_uhat;
      if (!dbox.is_empty() && dbox.dim() == du.size()) {
        Vec clamped = du.cwiseMax(dbox.lo()).cwiseMin(dbox.hi());
        if ((clamped - du).cwiseAbs().maxCoeff() > 0.0) {
          ++latch.clamp_events;
          next = latch.uhat + clamped;
        }
      }
    }
    latch.period = k;
    latch.cell = cell;
    latch.uhat = next;
  }
  return latch.uhat;
}

Vec composed_control(const HierarchicalController& hc, double t, const Vec& x, const Vec& xhat,
                     SampleLatch& latch) {
  Vec uhat = zoh_control(hc, t, xhat, latch);
  double t_fold = t - static_cast<double>(latch.period) * hc.t_s;
  if (t_fold < 0.0) t_fold = 0.0;
  if (t_fold > hc.t_s) t_fold = hc.t_s;
  Vec e = error_state(x, xhat, uhat, hc.es);
  Vec z(1 + e.size() + xhat.size() + uhat.size());
  z << t_fold, e, xhat, uhat;
  return hc.cert.kappa.eval<double>(z);
}

namespace {

double halton(std::uint32_t index, std::uint32_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * (index % base);
    index /= base;
  }
  return r;
}

constexpr std::uint32_t kHaltonBases[] = {2, 3, 5, 7, 11, 13, 17, 19};

}  // namespace

WinningWitness winning_initial_set_query(const HierarchicalController& hc, const Vec& x) {
  WinningWitness result;
  const PartitionGrid& grid = hc.grid;
  const Box& e0 = hc.cert.e0;
  if (e0.is_empty()) return result;

  /* conservative per-dimension reach of the error offset: componentwise
   * for the identity frame; the full corner norm when a state-dependent
   * frame may mix coordinates */
  Vec e0_mag = e0.lo().cwiseAbs().cwiseMax(e0.hi().cwiseAbs());
  Vec radius = e0_mag;
  if (hc.es.state_transform) radius = Vec::Constant(e0.dim(), e0_mag.norm());

  const Eigen::Index nd = grid.domain().dim();
  for (CellIndex cell = 0; cell < grid.total_cells(); ++cell) {
    if (!hc.table.in_r[cell] || !hc.table.has_choice(cell)) continue;
    const Vec uhat = hc.inputs.point(hc.table.choice[cell]);
    Box cell_box = grid.cell_box(cell);
    Box image = image_pi(hc.es.pi, cell_box, Box(uhat, uhat));
    if (!box_expand(image, radius).contains(x)) continue;

    auto try_candidate = [&](const Vec& xhat) -> bool {
      if (grid.cell_of(xhat) != cell) return false;
      Vec e = error_state(x, xhat, uhat, hc.es);
      if (!e0.contains(e)) return false;
      result.member = true;
      result.xhat0 = xhat;
      result.cell = cell;
      return true;
    };

    if (try_candidate(cell_box.center())) return result;
    for (std::uint32_t k = 1; k <= 32; ++k) {
      Vec cand(nd);
      for (Eigen::Index i = 0; i < nd; ++i) {
        double frac = halton(k, kHaltonBases[i % 8]);
        cand[i] = cell_box.lo()[i] + frac * (cell_box.hi()[i] - cell_box.lo()[i]);
      }
      if (try_candidate(cand)) return result;
    }
  }
  return result;
}

}  // namespace reachsynth
