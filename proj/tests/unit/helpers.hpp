#pragma once

#include "mftg/model.hpp"

// Standard grid-walk instances the suites share.
namespace mftg_test {

// m=2, G=3, team 0 chases target 0 and avoids nobody, the two teams pull on
// each other with opposite signs.
inline mftg::DriftParams coupled_drift() {
  mftg::DriftParams p;
  p.G = 3;
  p.m = 2;
  p.targets = {0, 2};
  p.weights = {{0, 1}, {-1, 0}};
  p.gamma = 0.9;
  return p;
}

// Same shape with zero cross weights; the teams are independent problems.
inline mftg::DriftParams decoupled_drift() {
  mftg::DriftParams p = coupled_drift();
  p.weights = {{0, 0}, {0, 0}};
  return p;
}

inline mftg::DriftParams single_team_drift() {
  mftg::DriftParams p;
  p.G = 2;
  p.m = 1;
  p.targets = {0};
  p.weights = {{0}};
  p.gamma = 0.9;
  return p;
}

inline mftg::DriftParams periodic_drift() {
  mftg::DriftParams p = coupled_drift();
  p.variant = mftg::DriftParams::Variant::kPeriodic;
  p.idio_weights = {0.25, 0.5, 0.25};
  return p;
}

}  // namespace mftg_test
