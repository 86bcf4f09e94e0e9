#pragma once

#include "vizproxy/classify.hpp"
#include "vizproxy/cost.hpp"
#include "vizproxy/csv.hpp"
#include "vizproxy/encode.hpp"
#include "vizproxy/gallery.hpp"
#include "vizproxy/oracle.hpp"
#include "vizproxy/rank.hpp"
#include "vizproxy/rewrite.hpp"
#include "vizproxy/svg.hpp"
