//! Human tables, JSON rendering and atomic emission.

use std::path::Path;

use ubmat::io::write_atomic;
use ubmat::{Method, PowerStudy, Result, TestReport, Type1Study, UbMatrix};

/// Pretty JSON with a trailing newline.
pub fn to_json_line(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes atomically to `out`, or prints to stdout.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn format_coords(x: &UbMatrix) -> String {
    let k = x.block_count();
    let mut t = format!("partition {}\n", x.partition());
    t.push_str("a:");
    for v in x.a() {
        t.push_str(&format!(" {v}"));
    }
    t.push_str("\nb:\n");
    for row in 0..k {
        t.push(' ');
        for col in 0..k {
            t.push_str(&format!(" {}", x.b()[row * k + col]));
        }
        t.push('\n');
    }
    t
}

pub fn format_report(r: &TestReport) -> String {
    let mut t = String::new();
    let name = match r.test {
        "one_sample" => "one-sample information test",
        _ => "M-sample information test",
    };
    t.push_str(&format!("{name}\n"));
    t.push_str(&format!("  statistic       {:.6}\n", r.statistic));
    let comps: Vec<String> = r.components.iter().map(|c| format!("{c:.6}")).collect();
    t.push_str(&format!("  components      {}\n", comps.join(", ")));
    match r.method {
        Method::MonteCarlo => {
            t.push_str(&format!(
                "  p-value         {:.6} (monte_carlo, {} replicates, seed {}; +1/(R+1) smoothing)\n",
                r.p_value,
                r.replicates.unwrap_or(0),
                r.seed.unwrap_or(0),
            ));
        }
        Method::MorrisonApprox => {
            t.push_str(&format!(
                "  p-value         {:.6} (morrison_approx)\n",
                r.p_value
            ));
        }
    }
    t.push_str(&format!(
        "  critical value  {:.6} at alpha = {}\n",
        r.critical_value, r.alpha
    ));
    t.push_str(&format!(
        "  decision        {} H0 at alpha = {}\n",
        if r.reject { "reject" } else { "fail to reject" },
        r.alpha
    ));
    t
}

pub fn format_study_type1(s: &Type1Study) -> String {
    format!(
        "type-1 study\n\
         \x20 rejection rate  {:.6} ({} of {})\n\
         \x20 standard error  {:.6}\n\
         \x20 95% interval    [{:.6}, {:.6}]\n\
         \x20 critical value  {:.6} at alpha = {} ({} law draws)\n\
         \x20 seed            {}\n",
        s.rejection_rate,
        s.rejections,
        s.replicates,
        s.standard_error,
        s.confidence_interval.0,
        s.confidence_interval.1,
        s.critical_value,
        s.alpha,
        s.law_replicates,
        s.seed,
    )
}

pub fn format_study_power(s: &PowerStudy) -> String {
    let deltas: Vec<String> = s.noncentrality.iter().map(|d| format!("{d:.4}")).collect();
    format!(
        "power study\n\
         \x20 empirical power   {:.6} (se {:.6}, {} replicates)\n\
         \x20 predicted power   {:.6} (se {:.6}, {} mixture draws)\n\
         \x20 critical value    {:.6} at alpha = {}\n\
         \x20 noncentralities   {}\n\
         \x20 seed              {}\n",
        s.empirical_power,
        s.empirical_se,
        s.replicates,
        s.predicted_power,
        s.predicted_se,
        s.law_replicates,
        s.critical_value,
        s.alpha,
        deltas.join(", "),
        s.seed,
    )
}
