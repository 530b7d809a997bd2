//! Rating backends: the deterministic local rule rater and a generic remote
//! chat-completion client.

use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend response malformed: {0}")]
    MalformedResponse(String),
    #[error("missing credential: set {0}")]
    MissingCredential(String),
}

/// Anything that can turn a rendered prompt into a raw response string.
pub trait RatingBackend: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

// ---------------------------------------------------------------------------
// Local rule rater
// ---------------------------------------------------------------------------

/// APIs that by themselves signal anti-analysis intent.
const DIRECT_ANTI_ANALYSIS_APIS: &[&str] = &[
    "IsDebuggerPresent",
    "CheckRemoteDebuggerPresent",
    "NtQueryInformationProcess",
    "NtSetInformationThread",
    "NtQueryObject",
    "OutputDebugStringA",
    "OutputDebugStringW",
    "DebugActiveProcess",
    "DebugActiveProcessStop",
    "WaitForDebugEvent",
];

/// APIs that probe the runtime environment: volume serials, names, process
/// lists, hardware, timing. The workhorses of sandbox fingerprinting.
const ENVIRONMENT_PROBE_APIS: &[&str] = &[
    "GetVolumeInformationA",
    "GetVolumeInformationW",
    "GetComputerNameA",
    "GetComputerNameW",
    "GetUserNameA",
    "GetUserNameW",
    "CreateToolhelp32Snapshot",
    "Process32First",
    "Process32Next",
    "Process32FirstW",
    "Process32NextW",
    "Module32First",
    "Module32Next",
    "Thread32First",
    "Thread32Next",
    "GetSystemInfo",
    "GetNativeSystemInfo",
    "GlobalMemoryStatusEx",
    "GetAdaptersInfo",
    "GetAdaptersAddresses",
    "GetSystemFirmwareTable",
    "EnumSystemFirmwareTables",
    "FindWindowA",
    "FindWindowW",
    "FindWindowExA",
    "FindWindowExW",
    "GetTickCount",
    "GetTickCount64",
    "QueryPerformanceCounter",
    "timeGetTime",
    "GetCursorPos",
    "GetLastInputInfo",
    "GetSystemMetrics",
    "IsProcessorFeaturePresent",
];

/// Mnemonics that rate 9 on sight; the remaining watched mnemonics rate 7.
const HOT_MNEMONICS: &[&str] = &["cpuid", "rdtsc", "sidt", "sgdt", "sldt", "str", "icebp"];

/// Segment offsets on the debugger-detection fast path (PEB, TEB).
const HOT_SEGMENT_ACCESSES: &[&str] = &["fs:30h", "fs:18h"];

/// Substrings (lowercase) naming VMs, sandboxes, debuggers, and analysis
/// tools.
const TADA_LEXICON: &[&str] = &[
    "virtualbox",
    "vbox",
    "vmware",
    "vmtoolsd",
    "vgauthservice",
    "qemu",
    "kvm",
    "xen",
    "hyper-v",
    "hyperv",
    "parallels",
    "prl_cc",
    "prl_tools",
    "bochs",
    "virtual machine",
    "virtual hd",
    "sandbox",
    "sandboxie",
    "sbiedll",
    "cuckoo",
    "joebox",
    "anubis",
    "wine",
    "wdagutilityaccount",
    "maltest",
    "debugger",
    "ollydbg",
    "x64dbg",
    "x32dbg",
    "windbg",
    "ida.exe",
    "ida64",
    "idag",
    "ghidra",
    "immunity",
    "dnspy",
    "radare",
    "frida",
    "cheatengine",
    "cheat engine",
    "wireshark",
    "fiddler",
    "procmon",
    "process monitor",
    "process hacker",
    "processhacker",
    "procexp",
    "process explorer",
    "sysinternals",
    "regmon",
    "filemon",
    "tcpview",
    "autoruns",
    "dumpcap",
    "httpdebugger",
    "vboxservice",
    "vboxtray",
    "xenservice",
    "qemu-ga",
];

/// Deterministic offline rater: scores each prompt bullet from a fixed table
/// and returns the maximum.
///
/// Published table:
/// * direct anti-analysis API: 10
/// * PEB/TEB segment access (fs:30h, fs:18h): 9
/// * hot mnemonic (cpuid, rdtsc, sidt, sgdt, sldt, str, icebp): 9
/// * string matching the TADA lexicon: 9
/// * API with a lexicon-matching string argument: 8
/// * environment-probing API: 7
/// * any other watched mnemonic or segment access: 7
/// * any other API call: 3; any other string: 2
/// * no features: 0
#[derive(Debug, Default, Clone)]
pub struct LocalRuleRater;

impl LocalRuleRater {
    pub fn score_prompt(prompt: &str) -> u8 {
        prompt
            .lines()
            .filter_map(|line| line.strip_prefix("- "))
            .map(Self::score_feature_line)
            .max()
            .unwrap_or(0)
    }

    fn score_feature_line(line: &str) -> u8 {
        if let Some(rest) = line.strip_prefix("Uncommon INS: ") {
            let mnemonic = rest.split([' ', '(']).next().unwrap_or("");
            if HOT_MNEMONICS.contains(&mnemonic) {
                return 9;
            }
            return 7;
        }
        if let Some(rest) = line.strip_prefix("Segment Register Access: ") {
            let access = rest.split(' ').next().unwrap_or("");
            if HOT_SEGMENT_ACCESSES.contains(&access) {
                return 9;
            }
            return 7;
        }
        if let Some(rest) = line.strip_prefix("String Reference: ") {
            if lexicon_match(rest) {
                return 9;
            }
            return 2;
        }
        if let Some(rest) = line.strip_prefix("Called API: ") {
            let name = rest.split('(').next().unwrap_or("").trim();
            if DIRECT_ANTI_ANALYSIS_APIS.contains(&name) {
                return 10;
            }
            // quoted arguments naming sandbox artifacts
            if let Some(open) = rest.find('(') {
                if lexicon_match(&rest[open..]) {
                    return 8;
                }
            }
            if ENVIRONMENT_PROBE_APIS.contains(&name) {
                return 7;
            }
            return 3;
        }
        1
    }
}

fn lexicon_match(text: &str) -> bool {
    let lower = text.to_lowercase();
    TADA_LEXICON.iter().any(|term| lower.contains(term))
}

impl RatingBackend for LocalRuleRater {
    fn id(&self) -> String {
        "local-rule-rater".into()
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        Ok(Self::score_prompt(prompt).to_string())
    }
}

// ---------------------------------------------------------------------------
// Remote chat-completion backend
// ---------------------------------------------------------------------------

/// Connection settings for a chat-completions endpoint.
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Full URL of the completions endpoint.
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout: Duration,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            url: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4-turbo".into(),
            api_key_env: "TADASCAN_API_KEY".into(),
            timeout: Duration::from_secs(60),
        }
    }
}

/// Generic chat-completions client. Decoding is pinned deterministic
/// (temperature 0, top_p 0).
pub struct RemoteChatBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteChatBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(RemoteChatBackend { config, client })
    }

    pub fn request_body(model: &str, prompt: &str) -> Value {
        json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
            "top_p": 0,
        })
    }

    pub fn extract_content(response: &Value) -> Result<String, BackendError> {
        response["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                BackendError::MalformedResponse(
                    "missing choices[0].message.content".into(),
                )
            })
    }
}

impl RatingBackend for RemoteChatBackend {
    fn id(&self) -> String {
        format!("remote:{}", self.config.model)
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let key = std::env::var(&self.config.api_key_env)
            .map_err(|_| BackendError::MissingCredential(self.config.api_key_env.clone()))?;
        let body = Self::request_body(&self.config.model, prompt);
        let response = self
            .client
            .post(&self.config.url)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Transport(format!("HTTP {status}")));
        }
        let value: Value = response
            .json()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        Self::extract_content(&value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt_for(lines: &[&str]) -> String {
        let mut p = String::from("header\n");
        if !lines.is_empty() {
            p.push('\n');
            for l in lines {
                p.push_str("- ");
                p.push_str(l);
                p.push('\n');
            }
        }
        p
    }

    #[test]
    fn direct_api_scores_ten() {
        let p = prompt_for(&["Called API: IsDebuggerPresent()"]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 10);
    }

    #[test]
    fn lexicon_string_scores_nine() {
        let p = prompt_for(&["String Reference: \"VirtualBox\""]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 9);
    }

    #[test]
    fn no_features_scores_zero() {
        assert_eq!(LocalRuleRater::score_prompt(&prompt_for(&[])), 0);
    }

    #[test]
    fn sleep_alone_is_weak_evidence() {
        let p = prompt_for(&["Called API: Sleep(1000)"]);
        assert!(LocalRuleRater::score_prompt(&p) <= 3);
    }

    #[test]
    fn peb_access_scores_nine_and_other_segments_seven() {
        let p = prompt_for(&[
            "Segment Register Access: fs:30h (Linear address of Process Environment Block (PEB))",
        ]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 9);
        let p = prompt_for(&["Segment Register Access: fs:C0h (Pointer to FastSysCall in Wow64)"]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 7);
    }

    #[test]
    fn hot_mnemonic_nine_others_seven() {
        let p = prompt_for(&["Uncommon INS: cpuid (Processor information)"]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 9);
        let p = prompt_for(&["Uncommon INS: int 2Dh (CPU Interrupt)"]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 7);
        let p = prompt_for(&["Uncommon INS: pushfd (Can be used to read/write EFLAGS register)"]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 7);
    }

    #[test]
    fn environment_probe_scores_seven() {
        let p = prompt_for(&[
            "Called API: GetVolumeInformationA(\"c:\\\", 0, 0, 0x403100, 0x403104, 0x403104, 0, 0)",
        ]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 7);
    }

    #[test]
    fn artifact_string_argument_scores_eight() {
        let p = prompt_for(&["Called API: StrStrIW(<unknown>, \"VMWare\")"]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 8);
    }

    #[test]
    fn max_over_features_wins() {
        let p = prompt_for(&[
            "Called API: Sleep(1000)",
            "String Reference: \"cheatengine-i386.exe\"",
        ]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 9);
    }

    #[test]
    fn benign_string_scores_low() {
        let p = prompt_for(&["String Reference: \"Hello, world!\""]);
        assert_eq!(LocalRuleRater::score_prompt(&p), 2);
    }

    #[test]
    fn request_body_is_deterministic_chat_schema() {
        let body = RemoteChatBackend::request_body("gpt-4-turbo", "hi");
        assert_eq!(body["model"], "gpt-4-turbo");
        assert_eq!(body["temperature"], 0);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "hi");
    }

    #[test]
    fn extract_content_reads_first_choice() {
        let v = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": " 8"}}]
        });
        assert_eq!(RemoteChatBackend::extract_content(&v).unwrap(), " 8");
        let bad = serde_json::json!({"choices": []});
        assert!(RemoteChatBackend::extract_content(&bad).is_err());
    }
}
