#ifndef FOLDDIFF_VERSION_HPP
#define FOLDDIFF_VERSION_HPP

#define FOLDDIFF_VERSION_MAJOR 1
#define FOLDDIFF_VERSION_MINOR 0
#define FOLDDIFF_VERSION_PATCH 0
#define FOLDDIFF_VERSION_STRING "1.0.0"

#endif
