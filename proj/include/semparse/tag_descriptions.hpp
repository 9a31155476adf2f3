// Bundled tooltip table for OSM tags and keys.

#ifndef SEMPARSE_TAG_DESCRIPTIONS_HPP
#define SEMPARSE_TAG_DESCRIPTIONS_HPP

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace semparse {

struct tag_description {
  std::string_view key;
  std::string_view value;  // empty for key-only entries
  std::string_view text;
};

inline constexpr std::string_view no_description = "No description available";

inline constexpr auto tag_description_table = std::to_array<tag_description>({
    {"amenity", "", "Key for useful and important facilities for visitors and residents"},
    {"amenity", "parking", "A place for parking cars"},
    {"amenity", "bank", "A financial establishment where customers can deposit and withdraw money"},
    {"amenity", "bar", "A commercial establishment selling alcoholic drinks to be consumed on the premises"},
    {"amenity", "cafe", "A place that offers casual meals and beverages"},
    {"amenity", "restaurant", "A place selling full sit-down meals with servers"},
    {"amenity", "pharmacy", "A shop where a pharmacist sells medications"},
    {"amenity", "hospital", "A hospital providing in-patient medical treatment"},
    {"amenity", "school", "Premises of a primary or secondary school"},
    {"amenity", "cinema", "A place where films are shown"},
    {"amenity", "place_of_worship", "A church, mosque, temple or other place of worship"},
    {"amenity", "post_office", "A post office building with postal services"},
    {"amenity", "fuel", "A petrol station selling fuel for vehicles"},
    {"amenity", "fast_food", "A place concentrating on very fast counter-only service and take-away food"},
    {"amenity", "library", "A public library where books can be borrowed"},
    {"amenity", "police", "A police station"},
    {"amenity", "atm", "A machine which dispenses cash"},
    {"amenity", "toilets", "Public toilets"},
    {"amenity", "kindergarten", "A place for looking after preschool children"},
    {"amenity", "fire_station", "A station of a fire brigade"},
    {"tourism", "", "Key for places and things of specific interest to tourists"},
    {"tourism", "hotel", "An establishment providing overnight accommodation for guests"},
    {"tourism", "hostel", "Cheap accommodation with shared bedrooms"},
    {"tourism", "museum", "An institution displaying objects of historical, artistic or scientific interest"},
    {"tourism", "attraction", "A general tourist attraction"},
    {"tourism", "viewpoint", "A place worth visiting for the view"},
    {"tourism", "zoo", "A zoological garden"},
    {"tourism", "information", "An information point for tourists"},
    {"shop", "", "Key for places selling goods or services"},
    {"shop", "bakery", "A shop selling bread and pastries"},
    {"shop", "supermarket", "A large self-service store selling groceries"},
    {"shop", "butcher", "A shop selling meat"},
    {"shop", "books", "A shop selling books"},
    {"shop", "florist", "A shop selling flowers"},
    {"shop", "bicycle", "A shop selling or repairing bicycles"},
    {"railway", "", "Key for railways and related features"},
    {"railway", "station", "A railway station where passengers board trains"},
    {"railway", "tram_stop", "A place where passengers board trams"},
    {"leisure", "", "Key for places people go to in their spare time"},
    {"leisure", "park", "An open green area for recreation"},
    {"leisure", "playground", "An area designed for children to play"},
    {"leisure", "golf_course", "The playing area of a golf course"},
    {"leisure", "swimming_pool", "A swimming pool"},
    {"historic", "", "Key for historic features"},
    {"historic", "castle", "A castle or fortified residence"},
    {"historic", "monument", "A memorial object, especially large"},
    {"historic", "memorial", "A small memorial"},
    {"natural", "peak", "The top of a hill or mountain"},
    {"aeroway", "aerodrome", "An airport or airfield"},
    {"highway", "bus_stop", "A place where buses stop for passengers"},
    {"name", "", "The primary name of a feature"},
    {"website", "", "The official website of a feature"},
    {"opening_hours", "", "The times a feature is open"},
    {"phone", "", "A telephone number"},
    {"cuisine", "", "The type of food served"},
    {"wheelchair", "", "Whether a feature is accessible by wheelchair"},
    {"operator", "", "The company or entity operating a feature"},
    {"addr:street", "", "The street of the address"},
});

// Exact (key, value) lookup; a key-only lookup when `value` is absent.
inline std::string describe_tag(std::string_view key, std::optional<std::string_view> value = std::nullopt) {
  const std::string_view v = value.value_or("");
  auto it = std::find_if(tag_description_table.begin(), tag_description_table.end(),
                         [&](const tag_description& d) { return d.key == key && d.value == v; });
  if (it == tag_description_table.end()) return std::string(no_description);
  return std::string(it->text);
}

}  // namespace semparse

#endif  // SEMPARSE_TAG_DESCRIPTIONS_HPP
