//! Key directory layout: `pp.bin` plus one `<role>.key` per authority.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use evot_core::codec::Canonical;
use evot_core::protocol::{derive_rng, prepare_election, Authority, AuthorityKeys, Manifest, Meter, PublicParams};
use evot_core::scenario::ParamProfile;
use evot_service::Role;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;

/// Election manifest file (TOML) with the eligibility roll.
#[derive(Debug, Deserialize)]
pub struct ManifestFile {
    #[serde(flatten)]
    pub manifest: Manifest,
    #[serde(default)]
    pub roll: Vec<String>,
}

pub fn read_manifest(path: &Path) -> Result<ManifestFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn authority(role: Role) -> Option<Authority> {
    match role {
        Role::Board => None,
        Role::Rc => Some(Authority::RegCenter),
        Role::Po => Some(Authority::PollOfficer),
        Role::Vc => Some(Authority::VotCenter),
        Role::Cc => Some(Authority::CountCenter),
    }
}

pub fn keygen(manifest: &Path, profile: ParamProfile, seed: Option<u64>, out: &Path) -> Result<()> {
    let m = read_manifest(manifest)?;
    let mut rng = match seed {
        Some(s) => derive_rng(s, "prepare"),
        None => ChaCha20Rng::from_entropy(),
    };
    let (pp, secrets) = prepare_election(m.manifest, profile.params(), &mut rng, &Meter::new())?;
    fs::create_dir_all(out)?;
    fs::write(out.join("pp.bin"), pp.to_bytes())?;
    for role in Role::ALL {
        if let Some(a) = authority(role) {
            fs::write(out.join(format!("{role}.key")), secrets[a].to_bytes())?;
        }
    }
    println!("wrote pp.bin and four key files to {}", out.display());
    Ok(())
}

pub fn read_params(dir: &Path) -> Result<PublicParams> {
    let path = dir.join("pp.bin");
    let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    PublicParams::from_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_role_keys(dir: &Path, role: Role) -> Result<AuthorityKeys> {
    let path = dir.join(format!("{role}.key"));
    let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    AuthorityKeys::from_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))
}
