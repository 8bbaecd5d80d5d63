#pragma once

namespace ridgelab {

// Keeps large freed blocks in the heap instead of returning them to the OS.
// The training loop allocates and frees many multi-megabyte matrices per
// step; without this most of the time goes to page faults. No-op off glibc.
void tune_allocator();

}  // namespace ridgelab
