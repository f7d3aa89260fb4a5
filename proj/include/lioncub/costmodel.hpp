// SPDX-License-Identifier: Apache-2.0

// Alpha-beta cost model for the majority-vote implementations.
//
//   algorithm          latency              bandwidth
//   ps_naive           2(P-1) a             2 P N b B
//   ps_efficient       2 log2(P) a          3 (P-1)/P N b B
//   direct_allreduce   2 log2(P) a          2 (P-1)/P N (log2(P)+1) B
//   compressed_1bit    (P-1+log2(P)) a      (1 + (P-1)/P) N B
//
// a: latency per message (s), B: inverse bandwidth (s/bit), b: word bits.
// Computational (packing) overhead is not modeled.

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lioncub::costmodel {

enum class Algo { kPsNaive, kPsEfficient, kDirectAllreduce, kCompressed1Bit };

inline constexpr std::array<Algo, 4> kAllAlgos = {
    Algo::kPsNaive, Algo::kPsEfficient, Algo::kDirectAllreduce,
    Algo::kCompressed1Bit};

std::string to_string(Algo a);

struct CostParams {
  double alpha = 0.0;
  double beta = 0.0;
  double workers = 2;
  double params = 1;
  double word_bits = 32;

  // alpha, beta >= 0 (a zero term isolates the other), P >= 2, N >= 1, b >= 1.
  void validate() const;
};

struct Cost {
  double latency_s = 0.0;
  double bandwidth_s = 0.0;
  double total_s = 0.0;
};

Cost cost(Algo algo, const CostParams& cp);

struct Grid {
  std::vector<double> workers;
  std::vector<double> params;
  std::vector<double> alphas;
  std::vector<double> betas;
  double word_bits = 32;
};

struct SweepRow {
  Algo algo;
  CostParams point;
  Cost cost;
  bool is_argmin = false;
};

// One row per (algorithm, grid point); exactly one argmin per point (the
// first in kAllAlgos order on exact ties).
std::vector<SweepRow> sweep(const Grid& grid);

inline constexpr const char* kCsvHeader =
    "algo,P,N,alpha,beta,latency_s,bandwidth_s,total_s,is_argmin";

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace lioncub::costmodel
