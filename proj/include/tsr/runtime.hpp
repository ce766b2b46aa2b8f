#pragma once

namespace tsr {

/// Keeps large freed blocks on the heap instead of returning them to the
/// kernel. Training allocates and frees the same large buffers on every
/// loss evaluation. No-op outside glibc. Call once from main().
void retain_heap_memory();

}  // namespace tsr
