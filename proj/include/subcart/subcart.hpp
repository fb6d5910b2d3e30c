#pragma once

#include "subcart/bundle.hpp"
#include "subcart/cover.hpp"
#include "subcart/dist.hpp"
#include "subcart/embed.hpp"
#include "subcart/error.hpp"
#include "subcart/expr.hpp"
#include "subcart/linalg.hpp"
#include "subcart/load.hpp"
#include "subcart/parse.hpp"
#include "subcart/partition.hpp"
#include "subcart/rng.hpp"
#include "subcart/space.hpp"
