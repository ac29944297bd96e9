#pragma once

// Umbrella header: the complete treespace toolkit.

#include "taxa.hpp"
#include "split.hpp"
#include "tree.hpp"
#include "vector.hpp"
#include "rng.hpp"
#include "newick.hpp"
#include "geodesic.hpp"
#include "tangent.hpp"
#include "conditions.hpp"
#include "frechet.hpp"
