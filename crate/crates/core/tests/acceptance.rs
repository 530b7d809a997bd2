//! Acceptance suite: runs every criterion at its stated tolerance and prints
//! one pass/fail line per criterion. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::fmt::Write as _;
use std::time::Instant;

use common::{corpus_path, data_dir, golden, random_program, PeBuilder};
use tadascan::disasm::{build_cfg, disassemble_function, BlockId};
use tadascan::features::asm::AugmentationTable;
use tadascan::features::emulate::emulate_for_strings;
use tadascan::features::strings::EmulationTriggerConfig;
use tadascan::loader::{
    detect_packing, load_fixture, parse_pe, PackerHeuristicConfig, PackingVerdict,
};
use tadascan::rating::{build_prompt, classify, LocalRuleRater, RatingConfig};
use tadascan::report::{
    aggregate_outcomes, emit_report, evaluate_corpus, CorpusManifest, DetectionOutcome, ImplKind,
    ReportFormat, TadaTactic,
};
use tadascan::{analyze, AnalyzeConfig};

type CriterionResult = Result<String, String>;
type Criterion = (&'static str, fn() -> CriterionResult);

fn fixture_config() -> AnalyzeConfig {
    AnalyzeConfig {
        fixture: true,
        ..AnalyzeConfig::default()
    }
}

fn check(condition: bool, message: &str) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message.to_string())
    }
}

// ---------------------------------------------------------------------------
// criterion 2: mini-corpus detection under the local rule rater
// ---------------------------------------------------------------------------

fn criterion_2_mini_corpus() -> CriterionResult {
    let start = Instant::now();
    let manifest = CorpusManifest::load(&data_dir().join("corpus.manifest"))
        .map_err(|e| e.to_string())?;
    check(
        manifest.entries.len() >= 12,
        &format!("corpus has only {} implementations", manifest.entries.len()),
    )?;

    // all four tactics and all three kinds are represented
    for tactic in [
        TadaTactic::DebuggerEvasion,
        TadaTactic::SandboxEvasion,
        TadaTactic::VmEvasion,
        TadaTactic::AnalysisToolEvasion,
    ] {
        check(
            manifest.entries.iter().any(|e| e.tactic == tactic),
            &format!("no implementation for tactic {tactic:?}"),
        )?;
    }
    for kind in [ImplKind::Assembly, ImplKind::DirectApi, ImplKind::IndirectApi] {
        check(
            manifest.entries.iter().any(|e| e.kind == kind),
            &format!("no implementation of kind {kind:?}"),
        )?;
    }

    let stats = evaluate_corpus(&manifest, &LocalRuleRater, &fixture_config())
        .map_err(|e| e.to_string())?;
    check(
        stats.overall.detected == stats.overall.total && stats.overall.total >= 12,
        &format!(
            "detected {}/{}",
            stats.overall.detected, stats.overall.total
        ),
    )?;

    let benign = [
        "benign_arith",
        "benign_hello_messagebox",
        "benign_copy_loop",
        "benign_sleep",
        "benign_straightline",
        "benign_config_read",
    ];
    for name in benign {
        let report = analyze(&corpus_path(name), &LocalRuleRater, &fixture_config())
            .map_err(|e| format!("{name}: {e}"))?;
        check(
            report.positives.is_empty(),
            &format!("{name} has positives {:?}", report.positives),
        )?;
    }

    let elapsed = start.elapsed();
    check(
        elapsed.as_secs_f64() < 10.0,
        &format!("runtime {elapsed:?} exceeds 10 s"),
    )?;
    Ok(format!(
        "{}/{} implementations detected, {} benign fixtures clean, {:.2?}",
        stats.overall.detected,
        stats.overall.total,
        benign.len(),
        elapsed
    ))
}

// ---------------------------------------------------------------------------
// criterion 3: feature grammar and prompt template golden files
// ---------------------------------------------------------------------------

fn block_feature_texts(manifest: &str) -> Result<Vec<String>, String> {
    let report = {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("golden.tfx");
        std::fs::write(&path, manifest).map_err(|e| e.to_string())?;
        analyze(&path, &LocalRuleRater, &fixture_config()).map_err(|e| e.to_string())?
    };
    Ok(report
        .records
        .iter()
        .flat_map(|r| r.features.iter().map(|f| f.text.clone()))
        .collect())
}

fn criterion_3_golden_files() -> CriterionResult {
    let mut checked = 0usize;

    // single-feature fixtures -> exact grammar lines
    let cases: Vec<(&str, String, &str)> = vec![
        ("feature_uncommon_cpuid.txt", "base = 0x401000\ncode_hex = 0F A2 C3\n".into(), "cpuid"),
        ("feature_uncommon_rdtsc.txt", "base = 0x401000\ncode_hex = 0F 31 C3\n".into(), "rdtsc"),
        ("feature_uncommon_int2d.txt", "base = 0x401000\ncode_hex = CD 2D C3\n".into(), "int 2d"),
        (
            "feature_segment_fs30.txt",
            "base = 0x401000\ncode_hex = 64 A1 30 00 00 00 C3\n".into(),
            "fs:30h",
        ),
        (
            "feature_segment_fs18.txt",
            "base = 0x401000\ncode_hex = 64 A1 18 00 00 00 C3\n".into(),
            "fs:18h",
        ),
        (
            "feature_string_virtualbox.txt",
            "base = 0x401000\ncode_hex = 68 08 10 40 00 C3 90 90 56 69 72 74 75 61 6C 42 6F 78 00\n"
                .into(),
            "ascii string",
        ),
        (
            "feature_string_vmware.txt",
            // push 0x401008 ; ret ; pad ; UTF-16LE "VMWare"
            "base = 0x401000\ncode_hex = 68 08 10 40 00 C3 90 90 56 00 4D 00 57 00 61 00 72 00 65 00 00 00\n"
                .into(),
            "utf16 string",
        ),
        (
            "feature_api_isdebuggerpresent.txt",
            "base = 0x401000\ncode_hex = FF 15 00 30 40 00 C3\nimport = kernel32.dll, IsDebuggerPresent, 0x403000\n"
                .into(),
            "no-arg API",
        ),
        (
            "feature_api_getprocaddress.txt",
            // push "MpReportEventEx" ; push eax ; call [slot] ; ret ; string
            "base = 0x401000\ncode_hex = 68 0E 10 40 00 50 FF 15 00 30 40 00 C3 90 4D 70 52 65 70 6F 72 74 45 76 65 6E 74 45 78 00\nimport = kernel32.dll, GetProcAddress, 0x403000\n"
                .into(),
            "string-arg API",
        ),
    ];
    for (golden_name, manifest, label) in cases {
        let expected = golden(golden_name);
        let texts = block_feature_texts(&manifest)?;
        check(
            texts.contains(&expected),
            &format!("{label}: expected {expected:?}, pipeline produced {texts:?}"),
        )?;
        checked += 1;
    }

    // prompt header alone (zero features)
    let empty = build_prompt(
        BlockId {
            function_entry: 0x401000,
            start: 0x401000,
        },
        &[],
    );
    check(
        empty.rendered == golden("prompt_header.txt"),
        "prompt header does not match the golden bytes",
    )?;
    checked += 1;

    // full prompt for a cpuid block, via the real pipeline
    {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("cpuid.tfx");
        std::fs::write(&path, "base = 0x401000\ncode_hex = 0F A2 C3\n")
            .map_err(|e| e.to_string())?;
        let dump = dir.path().join("prompts");
        let config = AnalyzeConfig {
            fixture: true,
            dump_prompts: Some(dump.clone()),
            ..AnalyzeConfig::default()
        };
        analyze(&path, &LocalRuleRater, &config).map_err(|e| e.to_string())?;
        let prompt =
            std::fs::read_to_string(dump.join("00401000_00401000.txt")).map_err(|e| e.to_string())?;
        check(
            prompt == golden("prompt_cpuid_block.txt"),
            "cpuid block prompt does not match the golden bytes",
        )?;
        checked += 1;
    }

    // mixed-kind block: segment access + string + API call, fixed ordering
    {
        // mov eax, fs:[0x30] ; push str ; push eax ; call [slot] ; ret ; "MpReportEventEx"
        let manifest = "base = 0x401000\n\
             code_hex = 64 A1 30 00 00 00 68 14 10 40 00 50 FF 15 00 30 40 00 C3 90 4D 70 52 65 70 6F 72 74 45 76 65 6E 74 45 78 00\n\
             import = kernel32.dll, GetProcAddress, 0x403000\n";
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("mixed.tfx");
        std::fs::write(&path, manifest).map_err(|e| e.to_string())?;
        let dump = dir.path().join("prompts");
        let config = AnalyzeConfig {
            fixture: true,
            dump_prompts: Some(dump.clone()),
            ..AnalyzeConfig::default()
        };
        analyze(&path, &LocalRuleRater, &config).map_err(|e| e.to_string())?;
        let prompt =
            std::fs::read_to_string(dump.join("00401000_00401000.txt")).map_err(|e| e.to_string())?;
        check(
            prompt == golden("prompt_mixed_block.txt"),
            &format!("mixed block prompt mismatch; got:\n{prompt}"),
        )?;
        checked += 1;
    }

    Ok(format!("{checked} golden comparisons byte-exact"))
}

// ---------------------------------------------------------------------------
// criterion 4: augmentation table completeness
// ---------------------------------------------------------------------------

fn criterion_4_tables() -> CriterionResult {
    let table = AugmentationTable::default();
    check(
        table.mnemonic_count() == 15,
        &format!("mnemonic count {}", table.mnemonic_count()),
    )?;
    check(
        table.segment_offset_count() == 26,
        &format!("segment offset count {}", table.segment_offset_count()),
    )?;

    let expected_mnemonics = [
        ("pushf", "Can be used to read/write EFLAGS register"),
        ("pushfd", "Can be used to read/write EFLAGS register"),
        ("popf", "Can be used to read/write EFLAGS register"),
        ("popfd", "Can be used to read/write EFLAGS register"),
        ("pushfq", "Can be used to read/write EFLAGS register"),
        ("popfq", "Can be used to read/write EFLAGS register"),
        ("int", "CPU Interrupt"),
        ("icebp", "Tracing technique, Single Step Exception"),
        ("bts", "Set trap flag when number is exactly 8"),
        ("rdtsc", "Read time-stamp counter"),
        ("sidt", "Access Interupt Descriptor Table"),
        ("sldt", "Access Local Descriptor Table"),
        ("sgdt", "Access Global Descriptor Table"),
        ("str", "Store Task Register"),
        ("cpuid", "Processor information"),
    ];
    for (mnemonic, explanation) in expected_mnemonics {
        check(
            table.explain_mnemonic(mnemonic) == Some(explanation),
            &format!("mnemonic {mnemonic}: {:?}", table.explain_mnemonic(mnemonic)),
        )?;
    }

    let expected_fs: [(u32, &str); 26] = [
        (0x0, "Current Structured Exception Handling (SEH) frame"),
        (0x4, "Stack Base / Bottom of stack (high address)"),
        (0x8, "Stack Limit / Ceiling of stack (low address)"),
        (0xC, "SubSystemTib"),
        (0x10, "Fiber data"),
        (0x14, "Arbitrary data slot"),
        (0x18, "Linear address of TEB"),
        (0x1C, "Environment Pointer"),
        (
            0x20,
            "Process ID (in some Windows distributions this field is used as DebugContext)",
        ),
        (0x24, "Current thread ID"),
        (0x28, "Active RPC Handle"),
        (0x2C, "Linear address of the thread-local storage array"),
        (0x30, "Linear address of Process Environment Block (PEB)"),
        (0x34, "Last error number"),
        (0x38, "Count of owned critical sections"),
        (0x3C, "Address of CSR Client Thread"),
        (0x40, "Win32 Thread Information"),
        (
            0x44,
            "Win32 client information (NT), user32 private data (Wine)",
        ),
        (0xC0, "Pointer to FastSysCall in Wow64"),
        (0xC4, "Current Locale"),
        (0xC8, "FP Software Status Register"),
        (0xCC, "Reserved for OS (NT), kernel32 private data (Wine)"),
        (0x1A4, "Exception code"),
        (0x1A8, "Activation context stack"),
        (0x6E8, "Real Process ID"),
        (0x6EC, "Real Thread ID"),
    ];
    for (offset, explanation) in expected_fs {
        check(
            table.explain_segment_offset(tadascan::disasm::Seg::Fs, offset) == Some(explanation),
            &format!("fs:{offset:X}h explanation mismatch"),
        )?;
    }
    Ok("15 mnemonics and 26 fs offsets with exact explanations".into())
}

// ---------------------------------------------------------------------------
// criterion 5: emulation oracle equivalence
// ---------------------------------------------------------------------------

fn emulate_manifest(manifest: &str) -> Result<Vec<String>, String> {
    let image = load_fixture(manifest).map_err(|e| e.to_string())?;
    let disasm = disassemble_function(&image, image.entry_point).map_err(|e| e.to_string())?;
    let cfg = build_cfg(&disasm, image.entry_point);
    let outcome = emulate_for_strings(&cfg, &disasm, &image, &EmulationTriggerConfig::default());
    if outcome.budget_exceeded {
        return Err("budget exceeded".into());
    }
    Ok(outcome.strings.into_iter().map(|s| s.value).collect())
}

fn hexify(bytes: &[u8]) -> String {
    let mut out = String::new();
    for b in bytes {
        let _ = write!(out, "{b:02X} ");
    }
    out
}

fn criterion_5_emulation_oracles() -> CriterionResult {
    let start = Instant::now();
    let mut matched = 0usize;

    // 1. XOR loop (committed fixture). Oracle: byte-wise decode in test code.
    {
        let encoded: Vec<u8> = b"SbieDll.dll".iter().map(|b| b ^ 0x5A).collect();
        let expected: String = encoded.iter().map(|&b| (b ^ 0x5A) as char).collect();
        let manifest =
            std::fs::read_to_string(corpus_path("xor_decoded_string_check")).map_err(|e| e.to_string())?;
        let values = emulate_manifest(&manifest)?;
        check(
            values.contains(&expected),
            &format!("xor loop: expected {expected:?}, got {values:?}"),
        )?;
        matched += 1;
    }

    // 2. Add-rotate loop, built here. decode(b) = rol(b, 3) + 0x13.
    {
        let plain = b"wireshark.exe";
        let encoded: Vec<u8> = plain
            .iter()
            .map(|&p| p.wrapping_sub(0x13).rotate_right(3))
            .collect();
        // oracle first: decode independently of the interpreter
        let expected: String = encoded
            .iter()
            .map(|&b| (b.rotate_left(3).wrapping_add(0x13)) as char)
            .collect();
        check(
            expected == "wireshark.exe",
            "add-rotate oracle self-check failed",
        )?;

        // xor ecx,ecx ; L: mov al,[ecx+0x401030] ; rol al,3 ; add al,0x13 ;
        // mov [ecx+0x401050],al ; inc ecx ; cmp ecx,len ; jnz L ; ret
        let mut code: Vec<u8> = Vec::new();
        code.extend_from_slice(&[0x31, 0xC9]);
        code.extend_from_slice(&[0x8A, 0x81, 0x30, 0x10, 0x40, 0x00]);
        code.extend_from_slice(&[0xC0, 0xC0, 0x03]);
        code.extend_from_slice(&[0x04, 0x13]);
        code.extend_from_slice(&[0x88, 0x81, 0x50, 0x10, 0x40, 0x00]);
        code.push(0x41);
        code.extend_from_slice(&[0x83, 0xF9, plain.len() as u8]);
        // jnz back to 0x401002: next is current+2
        let site = 0x401000 + code.len() as u32;
        let rel = 0x401002i64 - (site as i64 + 2);
        code.extend_from_slice(&[0x75, rel as u8]);
        code.push(0xC3);
        while code.len() < 0x30 {
            code.push(0x90);
        }
        code.extend_from_slice(&encoded);
        while code.len() < 0x50 {
            code.push(0x00);
        }
        code.extend_from_slice(&vec![0u8; plain.len() + 1]);
        let manifest = format!("base = 0x401000\ncode_hex = {}\n", hexify(&code));
        let values = emulate_manifest(&manifest)?;
        check(
            values.contains(&expected),
            &format!("add-rotate loop: expected {expected:?}, got {values:?}"),
        )?;
        matched += 1;
    }

    // 3. Stack string (committed fixture). Oracle: the immediates spell it.
    {
        let manifest =
            std::fs::read_to_string(corpus_path("stack_string_vm_check")).map_err(|e| e.to_string())?;
        let values = emulate_manifest(&manifest)?;
        check(
            values.contains(&"VMware".to_string()),
            &format!("stack string: got {values:?}"),
        )?;
        matched += 1;
    }

    // 4. Encoded stack string: immediates are xor-encoded, decoded in place.
    {
        let plain = b"qemu-ga";
        let encoded: Vec<u8> = plain.iter().map(|&p| p ^ 0x27).collect();
        let expected: String = encoded.iter().map(|&b| (b ^ 0x27) as char).collect();
        check(expected == "qemu-ga", "encoded stack oracle self-check failed")?;

        let mut code: Vec<u8> = Vec::new();
        // mov byte [ebp-16+i], enc[i]  (7 consecutive movs -> trigger)
        for (i, &b) in encoded.iter().enumerate() {
            code.extend_from_slice(&[0xC6, 0x45, (0xF0 + i) as u8, b]);
        }
        // xor ecx, ecx
        code.extend_from_slice(&[0x31, 0xC9]);
        let loop_top = 0x401000 + code.len() as u32;
        // mov al, [ebp+ecx-16]
        code.extend_from_slice(&[0x8A, 0x44, 0x0D, 0xF0]);
        // xor al, 0x27
        code.extend_from_slice(&[0x34, 0x27]);
        // mov [ebp+ecx-16], al
        code.extend_from_slice(&[0x88, 0x44, 0x0D, 0xF0]);
        // inc ecx ; cmp ecx, len ; jnz loop_top
        code.push(0x41);
        code.extend_from_slice(&[0x83, 0xF9, plain.len() as u8]);
        let site = 0x401000 + code.len() as u32;
        let rel = loop_top as i64 - (site as i64 + 2);
        code.extend_from_slice(&[0x75, rel as u8]);
        code.push(0xC3);
        let manifest = format!("base = 0x401000\ncode_hex = {}\n", hexify(&code));
        let values = emulate_manifest(&manifest)?;
        check(
            values.contains(&expected),
            &format!("encoded stack string: expected {expected:?}, got {values:?}"),
        )?;
        matched += 1;
    }

    let elapsed = start.elapsed();
    check(
        elapsed.as_secs_f64() < 5.0,
        &format!("runtime {elapsed:?} exceeds 5 s"),
    )?;
    Ok(format!("{matched}/4 deobfuscation oracles matched, {elapsed:.2?}"))
}

// ---------------------------------------------------------------------------
// criterion 6: packing heuristic boundaries
// ---------------------------------------------------------------------------

fn criterion_6_packing_boundaries() -> CriterionResult {
    let config = PackerHeuristicConfig::default();

    let build = |libs: usize, funcs_per_lib: &[usize], section: &str| -> Result<_, String> {
        let mut builder = PeBuilder::new();
        builder = builder.section(section, 0x1000, &[0xC3], common::SCN_CODE_FLAGS);
        for (i, count) in funcs_per_lib.iter().take(libs).enumerate() {
            let symbols: Vec<String> = (0..*count).map(|j| format!("F{i}_{j}")).collect();
            let refs: Vec<&str> = symbols.iter().map(|s| s.as_str()).collect();
            builder = builder.import(&format!("lib{i}.dll"), &refs);
        }
        parse_pe(&builder.build()).map_err(|e| e.to_string())
    };

    // 4 libraries, plenty of functions -> packed
    let image = build(4, &[10, 10, 10, 10], ".text")?;
    let v = detect_packing(&image, &config);
    check(
        v.verdict == PackingVerdict::HeuristicPacked && v.library_count == 4,
        &format!("4-lib case: {v:?}"),
    )?;

    // 6 libraries but 14 imports total -> packed
    let image = build(6, &[3, 3, 2, 2, 2, 2], ".text")?;
    let v = detect_packing(&image, &config);
    check(
        v.verdict == PackingVerdict::HeuristicPacked && v.function_count == 14,
        &format!("14-import case: {v:?}"),
    )?;

    // exactly 5 libraries and 15 imports -> not packed
    let image = build(5, &[3, 3, 3, 3, 3], ".text")?;
    let v = detect_packing(&image, &config);
    check(
        v.verdict == PackingVerdict::NotPacked
            && v.library_count == 5
            && v.function_count == 15,
        &format!("boundary case: {v:?}"),
    )?;

    // UPX section name -> known packer
    let image = build(6, &[3, 3, 3, 3, 3, 3], "UPX0")?;
    let v = detect_packing(&image, &config);
    check(
        v.verdict == PackingVerdict::KnownPacker && v.packer_name.as_deref() == Some("UPX"),
        &format!("UPX case: {v:?}"),
    )?;

    Ok("4 boundary cases exact".into())
}

// ---------------------------------------------------------------------------
// criterion 7: threshold semantics
// ---------------------------------------------------------------------------

fn criterion_7_threshold() -> CriterionResult {
    let default_config = RatingConfig::default();
    for rating in 0..=10u8 {
        check(
            classify(rating, &default_config) == (rating >= 7),
            &format!("default threshold wrong at rating {rating}"),
        )?;
    }
    for threshold in 0..=10u8 {
        let config = RatingConfig {
            threshold,
            ..RatingConfig::default()
        };
        for rating in 0..=10u8 {
            check(
                classify(rating, &config) == (rating >= threshold),
                &format!("threshold {threshold} wrong at rating {rating}"),
            )?;
        }
    }
    Ok("classify(r) <=> r >= threshold over all 121 combinations".into())
}

// ---------------------------------------------------------------------------
// criterion 8: determinism
// ---------------------------------------------------------------------------

fn criterion_8_determinism() -> CriterionResult {
    let mut bytes: Option<Vec<u8>> = None;
    for _ in 0..2 {
        let report = analyze(
            &corpus_path("analysis_tool_process_scan"),
            &LocalRuleRater,
            &fixture_config(),
        )
        .map_err(|e| e.to_string())?;
        let rendered = emit_report(&report, ReportFormat::Json).map_err(|e| e.to_string())?;
        if let Some(first) = &bytes {
            check(first == &rendered, "reports differ between runs")?;
        } else {
            bytes = Some(rendered);
        }
    }
    Ok(format!(
        "two runs produced identical {}-byte reports",
        bytes.unwrap().len()
    ))
}

// ---------------------------------------------------------------------------
// criterion 9: evaluation aggregation arithmetic
// ---------------------------------------------------------------------------

fn criterion_9_aggregation() -> CriterionResult {
    let outcomes: Vec<DetectionOutcome> = (0..164)
        .map(|i| DetectionOutcome {
            id: format!("synthetic{i}"),
            tactic: TadaTactic::VmEvasion,
            kind: ImplKind::IndirectApi,
            involves_string: false,
            detected: i < 144,
        })
        .collect();
    let stats = aggregate_outcomes(&outcomes);
    check(
        (stats.overall.rate - 87.80).abs() <= 0.01,
        &format!("144/164 -> {}", stats.overall.rate),
    )?;
    Ok(format!("144/164 aggregates to {:.2}%", stats.overall.rate))
}

// ---------------------------------------------------------------------------
// criterion 10: CFG partition property on randomized programs
// ---------------------------------------------------------------------------

fn criterion_10_cfg_partition() -> CriterionResult {
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    let mut rng = StdRng::seed_from_u64(0x7ADA_5CA9);
    let mut violations = 0usize;
    let cases = 1000;
    let mut total_blocks = 0usize;

    for case in 0..cases {
        let code = random_program(&mut rng, 0x401000, 200);
        let manifest = format!("base = 0x401000\ncode_hex = {}\n", hexify(&code));
        let image = load_fixture(&manifest).map_err(|e| e.to_string())?;
        let disasm = match disassemble_function(&image, 0x401000) {
            Ok(d) => d,
            Err(e) => return Err(format!("case {case}: {e}")),
        };
        let cfg = build_cfg(&disasm, 0x401000);
        total_blocks += cfg.blocks.len();

        // partition: every decoded address in exactly one block
        let mut seen = std::collections::BTreeSet::new();
        let mut duplicated = false;
        for block in cfg.blocks.values() {
            for ins in &block.instructions {
                if !seen.insert(ins.address) {
                    duplicated = true;
                }
            }
        }
        let decoded: std::collections::BTreeSet<u32> =
            disasm.instructions.keys().copied().collect();
        if duplicated || seen != decoded {
            violations += 1;
            continue;
        }

        // edge closure: every successor is a block start
        let starts: std::collections::BTreeSet<u32> = cfg.blocks.keys().copied().collect();
        if cfg
            .blocks
            .values()
            .flat_map(|b| b.successors.iter())
            .any(|s| !starts.contains(s))
        {
            violations += 1;
        }
    }

    check(violations == 0, &format!("{violations}/{cases} violations"))?;
    Ok(format!(
        "{cases} random programs, {total_blocks} blocks, 0 violations"
    ))
}

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    let criteria: Vec<Criterion> = vec![
        (
            "criterion 2: mini-corpus detection (12 TADA fixtures, 6 benign)",
            criterion_2_mini_corpus,
        ),
        ("criterion 3: feature/prompt golden files byte-exact", criterion_3_golden_files),
        ("criterion 4: augmentation table completeness", criterion_4_tables),
        ("criterion 5: emulation oracle equivalence", criterion_5_emulation_oracles),
        ("criterion 6: packing heuristic boundaries", criterion_6_packing_boundaries),
        ("criterion 7: threshold semantics", criterion_7_threshold),
        ("criterion 8: report determinism", criterion_8_determinism),
        ("criterion 9: aggregation arithmetic (144/164 = 87.80%)", criterion_9_aggregation),
        ("criterion 10: CFG partition on 1000 random programs", criterion_10_cfg_partition),
    ];

    println!(
        "SKIP  criterion 1: headline detection rates need the third-party \
         164-program corpus plus a remote LLM and are not reproducible \
         offline; criteria 2-10 are the desk-scale substitutes"
    );

    let mut failures = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name} ({detail})"),
            Err(reason) => {
                println!("FAIL  {name} ({reason})");
                failures.push(format!("{name}: {reason}"));
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}
