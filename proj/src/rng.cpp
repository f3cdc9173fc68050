#include "sdde/simulate.hpp"

namespace sdde {

namespace {

std::seed_seq make_seed_seq(std::uint64_t seed, std::uint64_t stream)
{
   // A fixed tag keeps the key space distinct from plain seed_seq{seed} users.
   return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                        std::uint32_t{0x5dde5dde}};
}

} // namespace

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream)
{
   auto seq = make_seed_seq(seed, stream);
   engine_.seed(seq);
}

} // namespace sdde
