#pragma once
// Umbrella header: the whole laboratory in one include.

#include "core.hpp"       // IWYU pragma: export
#include "polygon.hpp"    // IWYU pragma: export
#include "mesh.hpp"       // IWYU pragma: export
#include "rep.hpp"        // IWYU pragma: export
#include "spectra.hpp"    // IWYU pragma: export
#include "dec.hpp"        // IWYU pragma: export
#include "conformal.hpp"  // IWYU pragma: export
#include "spacetime.hpp"  // IWYU pragma: export
#include "harmonic.hpp"   // IWYU pragma: export
#include "extract.hpp"    // IWYU pragma: export
#include "loops.hpp"      // IWYU pragma: export
#include "pipeline.hpp"   // IWYU pragma: export
#include "store.hpp"      // IWYU pragma: export
