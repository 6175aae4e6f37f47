#pragma once

namespace covest {

enum class LambertBranch { Principal, Lower };  // W_0 and W_{-1}

/// Real Lambert W: solves w e^w = y on the chosen branch by Halley iteration.
/// Principal needs y >= -1/e and returns w >= -1; Lower needs -1/e <= y < 0
/// and returns w <= -1. Throws DomainError outside those domains.
double lambert_w(LambertBranch branch, double y);

}  // namespace covest
