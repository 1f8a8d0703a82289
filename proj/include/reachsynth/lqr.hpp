/*
 * lqr.hpp
 *
 * Dense Riccati and Lyapunov solvers for the candidate generator. The
 * Riccati solution is obtained by integrating the Riccati flow to its
 * stabilizing equilibrium and polishing with Newton-Kleinman steps; each
 * Newton step is a Lyapunov solve via Kronecker vectorization. Dimensions
 * here are single digits, so dense direct solves are the right tool.
 */

#pragma once

#include "reachsynth/types.hpp"

namespace reachsynth {

/* solve A'X + XA + Q = 0 for Hurwitz A (Q symmetric) */
Mat solve_lyapunov(const Mat& a, const Mat& q);

/* stabilizing solution of A'X + XA - XBR^-1B'X + Q = 0 */
Mat solve_care(const Mat& a, const Mat& b, const Mat& q, const Mat& r);

/* LQR gain K = -R^-1 B' X so that A + BK is Hurwitz */
Mat lqr_gain(const Mat& a, const Mat& b, const Mat& q, const Mat& r);

/* largest real part over the spectrum */
double spectral_abscissa(const Mat& a);

}  // namespace reachsynth
