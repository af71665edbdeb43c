#pragma once
// Generated by oracle/oracle.py; do not edit.
#include <array>
namespace oracle {
inline constexpr std::array<double, 6> lambda_h1 = {7.282190656480475, 15.117733251363855, 21.77796354588374, 27.972692526620023, 33.75105446148021, 39.255479121353034};
inline constexpr std::array<double, 6> lambda_rho03 = {5.965995529254924, 10.581078653511348, 15.219358680630739, 19.190751843172205, 23.224418955292254, 26.90879758818194};
inline constexpr double fredholm_half_lambda = 3.6410953282402376;
inline constexpr double fredholm_half_sup = 0.33780531567150673;
inline constexpr double fredholm_half_l2 = 0.3771746903451549;
inline constexpr double fredholm_half_u0 = 0.06813529565472477;
inline constexpr double fredholm_half_umid = 0.3202445790231844;
inline constexpr double fredholm_mid_lambda = 11.199961953922166;
inline constexpr double fredholm_mid_sup = 0.4172876936143682;
inline constexpr double fredholm_mid_l2 = 0.3922575314378554;
inline constexpr double fredholm_mid_u0 = -0.14688183261344032;
inline constexpr double fredholm_mid_umid = -0.3256461128349123;
inline constexpr std::array<double, 3> small_sup = {0.021680162278712344, 0.005067143818185624, 0.0024834231396908962};
inline constexpr std::array<double, 3> small_energy = {-0.000778580016769552, -8.113947906189119e-05, -2.654851879363463e-05};
inline constexpr double branch_lambda = 7.332190656480475;
inline constexpr double branch_norm = 0.7679058096251444;
inline constexpr double hardy_sup_n64 = 0.3269486502167233;
inline constexpr double hardy_sup_n128 = 0.3345100557370726;
}  // namespace oracle
