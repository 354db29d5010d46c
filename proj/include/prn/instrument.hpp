#pragma once

#include <cstdint>

namespace prn::instrument {

/// Per-thread count of multiply-accumulates executed by forward kernels.
inline std::uint64_t& mac_counter() {
    thread_local std::uint64_t count = 0;
    return count;
}

/// Reads the MACs executed on this thread since construction.
class MacScope {
public:
    MacScope() : start_(mac_counter()) {}
    std::uint64_t count() const { return mac_counter() - start_; }

private:
    std::uint64_t start_;
};

}  // namespace prn::instrument
