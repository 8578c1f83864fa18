#pragma once

#include "soficlab/error.hpp"
#include "soficlab/exact.hpp"
#include "soficlab/group.hpp"
#include "soficlab/sofic.hpp"
#include "soficlab/symbolic.hpp"
#include "soficlab/setcover.hpp"
#include "soficlab/covers.hpp"
#include "soficlab/parallel.hpp"
#include "soficlab/microstates.hpp"
#include "soficlab/entropy.hpp"
#include "soficlab/tiling.hpp"
