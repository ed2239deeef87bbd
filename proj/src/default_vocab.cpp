// Bundled vocabularies for the default engineered schema. Permission and tag
// lists collect names seen in Android scan reports; both are padded with
// placeholder entries to 324 and 32 so vector layouts keep their documented
// width. Edit the exported schema file to replace placeholders.

#include <cstdio>
#include <string>
#include <vector>

#include "labelforge/features.hpp"

namespace labelforge {

namespace {

constexpr std::size_t kPermissionVocabSize = 324;
constexpr std::size_t kTagVocabSize = 32;

const char* const kAndroidPermissions[] = {
    "android.permission.ACCEPT_HANDOVER",
    "android.permission.ACCESS_BACKGROUND_LOCATION",
    "android.permission.ACCESS_CHECKIN_PROPERTIES",
    "android.permission.ACCESS_COARSE_LOCATION",
    "android.permission.ACCESS_FINE_LOCATION",
    "android.permission.ACCESS_LOCATION_EXTRA_COMMANDS",
    "android.permission.ACCESS_MEDIA_LOCATION",
    "android.permission.ACCESS_MOCK_LOCATION",
    "android.permission.ACCESS_NETWORK_STATE",
    "android.permission.ACCESS_NOTIFICATION_POLICY",
    "android.permission.ACCESS_SUPERUSER",
    "android.permission.ACCESS_SURFACE_FLINGER",
    "android.permission.ACCESS_WIFI_STATE",
    "android.permission.ACCOUNT_MANAGER",
    "android.permission.ACTIVITY_RECOGNITION",
    "android.permission.ADD_VOICEMAIL",
    "android.permission.ANSWER_PHONE_CALLS",
    "android.permission.AUTHENTICATE_ACCOUNTS",
    "android.permission.BATTERY_STATS",
    "android.permission.BIND_ACCESSIBILITY_SERVICE",
    "android.permission.BIND_APPWIDGET",
    "android.permission.BIND_DEVICE_ADMIN",
    "android.permission.BIND_INPUT_METHOD",
    "android.permission.BIND_JOB_SERVICE",
    "android.permission.BIND_NOTIFICATION_LISTENER_SERVICE",
    "android.permission.BIND_REMOTEVIEWS",
    "android.permission.BIND_VPN_SERVICE",
    "android.permission.BIND_WALLPAPER",
    "android.permission.BLUETOOTH",
    "android.permission.BLUETOOTH_ADMIN",
    "android.permission.BLUETOOTH_PRIVILEGED",
    "android.permission.BODY_SENSORS",
    "android.permission.BROADCAST_PACKAGE_REMOVED",
    "android.permission.BROADCAST_SMS",
    "android.permission.BROADCAST_STICKY",
    "android.permission.BROADCAST_WAP_PUSH",
    "android.permission.CALL_PHONE",
    "android.permission.CALL_PRIVILEGED",
    "android.permission.CAMERA",
    "android.permission.CAPTURE_AUDIO_OUTPUT",
    "android.permission.CHANGE_COMPONENT_ENABLED_STATE",
    "android.permission.CHANGE_CONFIGURATION",
    "android.permission.CHANGE_NETWORK_STATE",
    "android.permission.CHANGE_WIFI_MULTICAST_STATE",
    "android.permission.CHANGE_WIFI_STATE",
    "android.permission.CLEAR_APP_CACHE",
    "android.permission.CLEAR_APP_USER_DATA",
    "android.permission.CONTROL_LOCATION_UPDATES",
    "android.permission.DELETE_CACHE_FILES",
    "android.permission.DELETE_PACKAGES",
    "android.permission.DEVICE_POWER",
    "android.permission.DIAGNOSTIC",
    "android.permission.DISABLE_KEYGUARD",
    "android.permission.DUMP",
    "android.permission.EXPAND_STATUS_BAR",
    "android.permission.FACTORY_TEST",
    "android.permission.FLASHLIGHT",
    "android.permission.FOREGROUND_SERVICE",
    "android.permission.GET_ACCOUNTS",
    "android.permission.GET_PACKAGE_SIZE",
    "android.permission.GET_TASKS",
    "android.permission.GLOBAL_SEARCH",
    "android.permission.INSTALL_LOCATION_PROVIDER",
    "android.permission.INSTALL_PACKAGES",
    "android.permission.INSTALL_SHORTCUT",
    "android.permission.INTERACT_ACROSS_USERS_FULL",
    "android.permission.INTERNAL_SYSTEM_WINDOW",
    "android.permission.INTERNET",
    "android.permission.KILL_BACKGROUND_PROCESSES",
    "android.permission.MANAGE_ACCOUNTS",
    "android.permission.MANAGE_DOCUMENTS",
    "android.permission.MASTER_CLEAR",
    "android.permission.MEDIA_CONTENT_CONTROL",
    "android.permission.MODIFY_AUDIO_SETTINGS",
    "android.permission.MODIFY_PHONE_STATE",
    "android.permission.MOUNT_FORMAT_FILESYSTEMS",
    "android.permission.MOUNT_UNMOUNT_FILESYSTEMS",
    "android.permission.NFC",
    "android.permission.PACKAGE_USAGE_STATS",
    "android.permission.PERSISTENT_ACTIVITY",
    "android.permission.PROCESS_OUTGOING_CALLS",
    "android.permission.READ_CALENDAR",
    "android.permission.READ_CALL_LOG",
    "android.permission.READ_CONTACTS",
    "android.permission.READ_EXTERNAL_STORAGE",
    "android.permission.READ_FRAME_BUFFER",
    "android.permission.READ_HISTORY_BOOKMARKS",
    "android.permission.READ_INPUT_STATE",
    "android.permission.READ_LOGS",
    "android.permission.READ_PHONE_NUMBERS",
    "android.permission.READ_PHONE_STATE",
    "android.permission.READ_PROFILE",
    "android.permission.READ_SETTINGS",
    "android.permission.READ_SMS",
    "android.permission.READ_SOCIAL_STREAM",
    "android.permission.READ_SYNC_SETTINGS",
    "android.permission.READ_SYNC_STATS",
    "android.permission.READ_USER_DICTIONARY",
    "android.permission.REBOOT",
    "android.permission.RECEIVE_BOOT_COMPLETED",
    "android.permission.RECEIVE_MMS",
    "android.permission.RECEIVE_SMS",
    "android.permission.RECEIVE_WAP_PUSH",
    "android.permission.RECORD_AUDIO",
    "android.permission.REORDER_TASKS",
    "android.permission.REQUEST_DELETE_PACKAGES",
    "android.permission.REQUEST_IGNORE_BATTERY_OPTIMIZATIONS",
    "android.permission.REQUEST_INSTALL_PACKAGES",
    "android.permission.RESTART_PACKAGES",
    "android.permission.SEND_RESPOND_VIA_MESSAGE",
    "android.permission.SEND_SMS",
    "android.permission.SET_ALARM",
    "android.permission.SET_ALWAYS_FINISH",
    "android.permission.SET_ANIMATION_SCALE",
    "android.permission.SET_DEBUG_APP",
    "android.permission.SET_PREFERRED_APPLICATIONS",
    "android.permission.SET_PROCESS_LIMIT",
    "android.permission.SET_TIME",
    "android.permission.SET_TIME_ZONE",
    "android.permission.SET_WALLPAPER",
    "android.permission.SET_WALLPAPER_HINTS",
    "android.permission.SIGNAL_PERSISTENT_PROCESSES",
    "android.permission.STATUS_BAR",
    "android.permission.SUBSCRIBED_FEEDS_READ",
    "android.permission.SYSTEM_ALERT_WINDOW",
    "android.permission.TRANSMIT_IR",
    "android.permission.UNINSTALL_SHORTCUT",
    "android.permission.UPDATE_DEVICE_STATS",
    "android.permission.USE_BIOMETRIC",
    "android.permission.USE_CREDENTIALS",
    "android.permission.USE_FINGERPRINT",
    "android.permission.USE_SIP",
    "android.permission.VIBRATE",
    "android.permission.WAKE_LOCK",
    "android.permission.WRITE_APN_SETTINGS",
    "android.permission.WRITE_CALENDAR",
    "android.permission.WRITE_CALL_LOG",
    "android.permission.WRITE_CONTACTS",
    "android.permission.WRITE_EXTERNAL_STORAGE",
    "android.permission.WRITE_GSERVICES",
    "android.permission.WRITE_HISTORY_BOOKMARKS",
    "android.permission.WRITE_PROFILE",
    "android.permission.WRITE_SECURE_SETTINGS",
    "android.permission.WRITE_SETTINGS",
    "android.permission.WRITE_SMS",
    "android.permission.WRITE_SOCIAL_STREAM",
    "android.permission.WRITE_SYNC_SETTINGS",
    "android.permission.WRITE_USER_DICTIONARY",
    "com.android.alarm.permission.SET_ALARM",
    "com.android.browser.permission.READ_HISTORY_BOOKMARKS",
    "com.android.browser.permission.WRITE_HISTORY_BOOKMARKS",
    "com.android.launcher.permission.INSTALL_SHORTCUT",
    "com.android.launcher.permission.READ_SETTINGS",
    "com.android.launcher.permission.UNINSTALL_SHORTCUT",
    "com.android.launcher.permission.WRITE_SETTINGS",
    "com.android.vending.BILLING",
    "com.android.vending.CHECK_LICENSE",
    "com.google.android.c2dm.permission.RECEIVE",
    "com.google.android.gms.permission.ACTIVITY_RECOGNITION",
    "com.google.android.providers.gsf.permission.READ_GSERVICES",
};

const char* const kScanTags[] = {
    "android",
    "apk",
    "calls-wmi",
    "checks-gps",
    "checks-network-adapters",
    "clipboard",
    "contains-elf",
    "crypto",
    "detect-debug-environment",
    "direct-cpu-clock-access",
    "dyn-calls",
    "long-sleeps",
    "native",
    "obfuscated",
    "reflection",
    "runtime-modules",
    "sends-sms",
    "receives-sms",
    "signed",
    "telephony",
    "trusted",
    "via-tor",
};

std::vector<std::string> padded(const char* const* first, std::size_t n, std::size_t size,
                                const char* placeholder) {
  std::vector<std::string> out(first, first + n);
  for (std::size_t i = out.size(); i < size; ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%03zu", placeholder, i);
    out.emplace_back(buf);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& default_permission_vocab() {
  static const auto vocab = padded(kAndroidPermissions, std::size(kAndroidPermissions),
                                   kPermissionVocabSize, "unassigned.permission.");
  return vocab;
}

const std::vector<std::string>& default_tag_vocab() {
  static const auto vocab = padded(kScanTags, std::size(kScanTags), kTagVocabSize, "unassigned-tag-");
  return vocab;
}

}  // namespace labelforge
