#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "topost/case_io.hpp"
#include "topost/grid.hpp"

namespace topost::test {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(TOPOST_DATA_DIR) / name;
}

inline Grid load_case(const std::string& name) { return read_matpower(data_path(name + ".m")); }

inline Branch line(std::string id, BusIndex from, BusIndex to, double sigma = 1.0,
                   BranchStatus status = BranchStatus::connected) {
  return Branch{std::move(id), from, to, sigma, status};
}

inline std::vector<Bus> buses(std::initializer_list<const char*> ids) {
  std::vector<Bus> out;
  for (const char* id : ids) out.push_back(Bus{id, std::string("sub_") + id});
  return out;
}

inline std::vector<Injection> injections(const std::vector<double>& p) {
  std::vector<Injection> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back(Injection{"inj_" + std::to_string(i + 1), i, p[i]});
  return out;
}

// 1-2, 1-3, 3-2 with unit susceptance, P = (+1, -1, 0), slack bus 3.
inline Grid triangle() {
  return Grid(buses({"1", "2", "3"}), {line("l_1-2", 0, 1), line("l_1-3", 0, 2), line("l_3-2", 2, 1)},
              injections({1.0, -1.0, 0.0}), 2);
}

inline Grid two_bus(double sigma) {
  return Grid(buses({"1", "2"}), {line("l_1-2", 0, 1, sigma)}, injections({0.5, -0.5}), 0);
}

// Two identical lines between two buses.
inline Grid twins() {
  return Grid(buses({"1", "2"}), {line("l_a", 0, 1, 2.0), line("l_b", 0, 1, 2.0)}, injections({0.8, -0.8}), 1);
}

// Balanced Wheatstone bridge: 2-3 carries no flow.
inline Grid diamond() {
  return Grid(buses({"1", "2", "3", "4"}),
              {line("l_1-2", 0, 1), line("l_1-3", 0, 2), line("l_2-4", 1, 3), line("l_3-4", 2, 3),
               line("l_2-3", 1, 2, 0.5)},
              injections({1.0, 0.0, 0.0, -1.0}), 3);
}

// Meshed 5-bus grid with one open line and a 4-branch substation at bus 3.
inline Grid five_bus() {
  return Grid(buses({"1", "2", "3", "4", "5"}),
              {line("l_1-2", 0, 1, 10.0), line("l_1-3", 0, 2, 4.0), line("l_2-3", 1, 2, 5.0),
               line("l_3-4", 2, 3, 8.0), line("l_3-5", 2, 4, 3.0), line("l_4-5", 3, 4, 6.0),
               line("l_2-4", 1, 3, 2.5, BranchStatus::disconnected), line("l_1-5", 0, 4, 2.0)},
              injections({1.2, -0.3, 0.4, -0.9, -0.4}), 0);
}

}  // namespace topost::test
