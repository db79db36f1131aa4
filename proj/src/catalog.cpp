#include "feedlens/catalog.hpp"

#include <algorithm>

namespace feedlens {

namespace {

std::vector<CategoryProfile> build_profiles() {
  return {
      {"food", "Food",
       {"food", "foods", "eat", "eating", "recipe", "recipes", "cooking", "restaurant", "restaurants",
        "snack", "snacks", "dessert", "desserts"},
       {{"recipe", "Quick home recipes", {"Easy weeknight recipe", "One-pan recipe for busy days"}},
        {"restaurant", "Restaurant finds", {"Hidden restaurant worth the queue", "Restaurant review"}},
        {"dessert", "Desserts and baking", {"Dessert you can bake tonight", "Dessert cafe tour"}}}},
      {"fashion", "Fashion",
       {"fashion", "outfit", "outfits", "clothes", "clothing", "style", "wardrobe"},
       {{"outfit", "Everyday outfit ideas", {"Outfit formula for the office", "Weekend outfit check"}},
        {"vintage", "Vintage and thrift", {"Vintage market haul", "Vintage jacket styling"}},
        {"capsule", "Capsule wardrobes", {"Capsule wardrobe in ten pieces", "Capsule packing list"}}}},
      {"skincare", "Skincare",
       {"skincare", "skin", "moisturizer", "sunscreen", "serum", "beauty"},
       {{"routine", "Simple daily routines", {"Morning routine in three steps", "Night routine reset"}},
        {"ingredient", "Ingredient deep dives", {"Ingredient guide: niacinamide", "Ingredient clash to avoid"}},
        {"sensitive", "Care for sensitive skin", {"Sensitive skin survival kit", "Sensitive skin patch test"}}}},
      {"travel", "Travel",
       {"travel", "traveling", "travelling", "trip", "trips", "vacation", "holiday", "destination",
        "destinations"},
       {{"weekend", "Weekend getaways nearby", {"Weekend getaway by train", "Weekend escape two hours away"}},
        {"itinerary", "Long-trip planning and itineraries",
         {"Itinerary for three weeks abroad", "Itinerary budget breakdown"}},
        {"vicarious", "Vicarious travel: beautiful photos and stories",
         {"Vicarious journey through mountain towns", "Vicarious views from a night ferry"}}}},
      {"fitness", "Fitness",
       {"fitness", "workout", "workouts", "gym", "exercise", "training", "running"},
       {{"home", "Home workouts", {"Home workout with no equipment", "Home mobility session"}},
        {"strength", "Strength training", {"Strength plan for beginners", "Strength progress in twelve weeks"}},
        {"running", "Running", {"Running a first 10k", "Running shoes compared"}}}},
      {"home_decor", "Home Decor",
       {"home decor", "decor", "interior", "interiors", "furniture", "apartment", "room"},
       {{"small", "Small-space living", {"Small apartment storage tricks", "Small balcony makeover"}},
        {"plants", "Indoor plants", {"Plants for low light corners", "Plants shelf styling"}},
        {"renovation", "Renovation projects", {"Renovation diary: kitchen", "Renovation on a budget"}}}},
      {"photography", "Photography",
       {"photography", "photo", "photos", "camera", "cameras", "photographer", "shooting"},
       {{"street", "Street photography", {"Street photo walk at dusk", "Street portraits with permission"}},
        {"film", "Film cameras", {"Film camera starter guide", "Film scans from last summer"}},
        {"editing", "Editing and color", {"Editing presets that stay natural", "Editing workflow in ten minutes"}}}},
      {"technology", "Technology",
       {"technology", "tech", "gadget", "gadgets", "phone", "laptop", "software"},
       {{"gadget", "Gadget reviews", {"Gadget I use every day", "Gadget regret list"}},
        {"setup", "Desk setups", {"Setup tour for remote work", "Setup cable management"}},
        {"coding", "Learning to code", {"Coding project for a weekend", "Coding habits that stuck"}}}},
      {"reading", "Reading",
       {"reading", "books", "book", "novel", "novels", "literature", "read"},
       {{"fiction", "Fiction picks", {"Fiction that kept me up late", "Fiction for a rainy week"}},
        {"nonfiction", "Nonfiction and ideas", {"Nonfiction that changed my mind", "Nonfiction shelf update"}},
        {"bookclub", "Book clubs and notes", {"Bookclub picks this month", "Bookclub discussion notes"}}}},
      {"pets", "Pets",
       {"pets", "pet", "cat", "cats", "dog", "dogs", "puppy", "kitten"},
       {{"cats", "Cat life", {"Cats and their strange naps", "Cats who open doors"}},
        {"dogs", "Dog life", {"Dogs at the beach", "Dogs learning new tricks"}},
        {"adoption", "Adoption stories", {"Adoption day diary", "Adoption checklist for first pets"}}}},
      {"outdoor", "Outdoor Activities",
       {"outdoor", "outdoors", "hiking", "hike", "camping", "climbing", "cycling", "nature"},
       {{"hiking", "Hiking trails", {"Hiking loop with a lake view", "Hiking gear for beginners"}},
        {"camping", "Camping", {"Camping without the stress", "Camping meals that travel well"}},
        {"cycling", "Cycling routes", {"Cycling route along the river", "Cycling commute lessons"}}}},
      {"art", "Art",
       {"art", "drawing", "painting", "illustration", "museum", "gallery", "sketch"},
       {{"sketch", "Sketching", {"Sketch a day challenge", "Sketch tools I actually use"}},
        {"gallery", "Gallery visits", {"Gallery show worth seeing", "Gallery notes from the weekend"}},
        {"watercolor", "Watercolor", {"Watercolor basics in one page", "Watercolor sky study"}}}},
      {"music", "Music",
       {"music", "song", "songs", "playlist", "concert", "concerts", "band", "guitar", "piano"},
       {{"playlist", "Playlists", {"Playlist for slow mornings", "Playlist for long drives"}},
        {"live", "Live shows", {"Live set that surprised me", "Live music in small venues"}},
        {"instrument", "Learning an instrument", {"Instrument practice log", "Instrument for adult beginners"}}}},
      {"parenting", "Parenting",
       {"parenting", "parents", "kids", "kid", "baby", "babies", "toddler", "children"},
       {{"toddler", "Toddler days", {"Toddler meal ideas", "Toddler sleep notes"}},
        {"activities", "Family activities", {"Activities for a rainy afternoon", "Activities that need no screen"}},
        {"school", "School years", {"School morning routine", "School supply list"}}}},
  };
}

}  // namespace

const std::vector<CategoryProfile>& category_profiles() {
  static const std::vector<CategoryProfile> profiles = build_profiles();
  return profiles;
}

const CategoryProfile* find_profile(std::string_view category_id) {
  const auto& profiles = category_profiles();
  const auto it = std::find_if(profiles.begin(), profiles.end(),
                               [&](const CategoryProfile& p) { return p.id == category_id; });
  return it == profiles.end() ? nullptr : &*it;
}

}  // namespace feedlens
