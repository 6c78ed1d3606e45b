#ifndef CASHLAB_TESTS_ORACLE_VALUES_HPP
#define CASHLAB_TESTS_ORACLE_VALUES_HPP

// Values computed offline with 50-digit mpmath from
//   P_U = (1/M) sum_m (1 - 1/(M theta_m))^K,  P_W = (1 - 1/sum theta)^K
// and frozen here.

#include <cstdint>
#include <vector>

namespace oracle {

struct GapCase {
  std::vector<std::int64_t> theta;
  std::int64_t budget;  // 4 * sum(theta)
  double gap;           // P_U - P_W
};

// Fixed grid: M in {2, 5, 11}, theta from {1, 2, 4, 8, 16}, not all equal.
inline const std::vector<GapCase>& gap_grid() {
  static const std::vector<GapCase> grid = {
      {{1, 8}, 36, 0.034565794743666855},
      {{4, 16}, 80, 0.022933403436332718},
      {{2, 8}, 40, 0.023052814298564206},
      {{2, 4}, 24, 0.0082070323081624978},
      {{8, 16}, 96, 0.0079379427971833616},
      {{4, 8}, 48, 0.008044582899002647},
      {{1, 2}, 12, 0.0082528996952802452},
      {{2, 16}, 72, 0.034521617875571008},
      {{1, 16}, 68, 0.041520990640338924},
      {{1, 4, 4, 8, 16}, 132, 0.028327962236965234},
      {{1, 2, 8, 16, 16}, 172, 0.031065478909665688},
      {{1, 2, 4, 4, 8}, 76, 0.020954683348832297},
      {{2, 2, 4, 4, 16}, 112, 0.033145585622091451},
      {{1, 2, 4, 8, 8}, 92, 0.023998579326666564},
      {{1, 4, 4, 4, 8}, 84, 0.015317598276804939},
      {{1, 1, 2, 2, 8}, 56, 0.033782791162374138},
      {{2, 8, 8, 16, 16}, 200, 0.017261960203623663},
      {{1, 2, 2, 4, 4, 8, 8, 8, 8, 16, 16}, 308, 0.02451205720000387},
      {{1, 2, 2, 2, 4, 4, 4, 8, 8, 8, 16}, 236, 0.025579527810399705},
      {{2, 2, 2, 2, 4, 8, 8, 16, 16, 16, 16}, 368, 0.029480275560281509},
      {{1, 1, 2, 4, 4, 8, 8, 8, 8, 16, 16}, 304, 0.025761162683296051},
      {{1, 1, 1, 2, 4, 4, 4, 4, 8, 8, 8}, 180, 0.023173203571215485},
      {{1, 1, 1, 1, 2, 4, 8, 8, 16, 16, 16}, 296, 0.038944721633175183},
      {{1, 1, 2, 2, 4, 4, 8, 8, 16, 16, 16}, 312, 0.033526911107051276},
      {{1, 2, 2, 4, 4, 4, 8, 8, 16, 16, 16}, 324, 0.029823655887880922},
  };
  return grid;
}

constexpr double kUniform13K10 = 0.081241072694922861;
constexpr double kWeighted13K10 = 0.056313514709472656;
constexpr double kGap13K10 = 0.024927557985450204;
constexpr double kGap13K1 = -0.083333333333333333;

}  // namespace oracle

#endif  // CASHLAB_TESTS_ORACLE_VALUES_HPP
