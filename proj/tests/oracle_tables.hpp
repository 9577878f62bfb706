#ifndef PETPRIOR_ORACLE_TABLES_HPP
#define PETPRIOR_ORACLE_TABLES_HPP

#include <array>

namespace petprior::testing {

enum class ClipKind { kCt, kPet };

struct ClipCase {
  ClipKind kind;
  float input;
  double expected;
};

/// Hand-evaluated clip-scale pairs: CT (HU + 1000) / 1800 and PET SUV / 12,
/// clamped to [0, 1].
inline constexpr std::array<ClipCase, 20> kClipScaleTable{{
    {ClipKind::kCt, -2000.0f, 0.0},
    {ClipKind::kCt, -1001.0f, 0.0},
    {ClipKind::kCt, -1000.0f, 0.0},
    {ClipKind::kCt, -550.0f, 0.25},
    {ClipKind::kCt, -100.0f, 0.5},
    {ClipKind::kCt, 0.0f, 0.5555555555555556},
    {ClipKind::kCt, 350.0f, 0.75},
    {ClipKind::kCt, 800.0f, 1.0},
    {ClipKind::kCt, 1000.0f, 1.0},
    {ClipKind::kCt, 3000.0f, 1.0},
    {ClipKind::kPet, -1.0f, 0.0},
    {ClipKind::kPet, 0.0f, 0.0},
    {ClipKind::kPet, 1.0f, 0.08333333333333333},
    {ClipKind::kPet, 2.5f, 0.20833333333333334},
    {ClipKind::kPet, 3.0f, 0.25},
    {ClipKind::kPet, 6.0f, 0.5},
    {ClipKind::kPet, 9.0f, 0.75},
    {ClipKind::kPet, 11.999f, 0.99991666666666667},
    {ClipKind::kPet, 12.0f, 1.0},
    {ClipKind::kPet, 24.0f, 1.0},
}};

}  // namespace petprior::testing

#endif  // PETPRIOR_ORACLE_TABLES_HPP
