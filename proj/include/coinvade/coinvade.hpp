#pragma once

#include "coinvade/dynamics.hpp"
#include "coinvade/kernel.hpp"
#include "coinvade/model.hpp"
#include "coinvade/profile.hpp"
#include "coinvade/rectangle.hpp"
#include "coinvade/version.hpp"
#include "coinvade/wavespeed.hpp"
