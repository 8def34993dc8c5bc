#pragma once

// Published final-phase aggregates of the pelvic fracture segmentation
// challenge: six metric means and mean container runtime per team, listed in
// the published rank order.

#include <string>
#include <vector>

#include "fracbench/ranking.hpp"

namespace fracbench::fixtures {

inline std::vector<TeamMeans> ct_leaderboard() {
  return {
      {"MIC-DKFZ", {0.9296, 5.866, 1.843, 0.9810, 2.368, 1.290}, 510.4},
      {"SMILE", {0.9096, 5.562, 1.663, 0.9802, 2.410, 1.321}, 333.1},
      {"MedIG", {0.9084, 6.207, 1.680, 0.9798, 2.452, 1.298}, 257.4},
      {"MedApp-AGH", {0.9049, 6.899, 2.007, 0.9783, 2.398, 1.385}, 617.2},
      {"Sano", {0.8802, 6.866, 1.697, 0.9491, 2.522, 1.343}, 308.1},
      {"Lee-SKKU-LG", {0.8079, 17.449, 3.612, 0.9718, 5.283, 1.576}, 535.5},
      {"CLone", {0.6339, 46.486, 8.899, 0.9332, 16.119, 2.730}, 160.0},
      {"Rzjs", {0.6787, 48.742, 7.963, 0.9287, 18.322, 2.806}, 343.5},
      {"Zeng-SJTU", {0.5423, 46.457, 17.757, 0.6235, 37.966, 12.306}, 206.9},
      {"Zou-SZU", {0.5944, 86.892, 18.090, 0.6708, 115.814, 22.005}, 360.7},
      {"watsons", {0.4940, 83.746, 19.186, 0.6165, 90.970, 16.478}, 255.4},
  };
}

inline std::vector<TeamMeans> xray_leaderboard() {
  return {
      {"SMILE", {0.7736, 37.366, 8.545, 0.9238, 13.299, 2.222}, 207.4},
      {"MedIG", {0.7640, 40.931, 9.043, 0.9268, 15.979, 2.462}, 168.5},
      {"LME", {0.7150, 42.986, 10.355, 0.8760, 21.474, 4.049}, 210.9},
      {"luckyjing", {0.7145, 45.752, 10.398, 0.8125, 46.060, 8.877}, 141.3},
      {"Puvvula-NIT", {0.5506, 158.171, 28.092, 0.7599, 150.135, 23.778}, 140.8},
  };
}

inline std::vector<std::string> names_of(const std::vector<TeamMeans>& teams) {
  std::vector<std::string> out;
  for (const TeamMeans& t : teams) out.push_back(t.team);
  return out;
}

}  // namespace fracbench::fixtures
