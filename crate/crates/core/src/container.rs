//! Read-only access to the ZIP container of an OpenDocument spreadsheet.
//!
//! The input file is read into memory once; every later part read works on
//! that buffer, so nothing ever touches the file again after [`open_container`].

use std::fmt;
use std::io::{Cursor, Read};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use zip::ZipArchive;

const CONTENT_PART: &str = "content.xml";
const SETTINGS_PART: &str = "settings.xml";
const MANIFEST_PART: &str = "META-INF/manifest.xml";

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("input is not a zip archive: {0}")]
    NotAZipArchive(String),
    #[error("archive has no {CONTENT_PART} entry")]
    MissingContentPart,
    #[error("archive entry {part} cannot be read: {reason}")]
    UnreadableEntry { part: String, reason: String },
    #[error("archive entry {0} is encrypted; password-protected documents are not supported")]
    Encrypted(String),
    #[error("no entry named {0} in archive")]
    UnknownPart(String),
    #[error("malformed XML in {part} at byte {offset}: {message}")]
    MalformedXml {
        part: String,
        offset: usize,
        message: String,
    },
}

/// What was found in the archive, plus the digest of the file bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContainerManifest {
    pub part_names: Vec<String>,
    pub content_part: String,
    pub settings_part: Option<String>,
    /// Lowercase hex SHA-256 of the input bytes, taken at open.
    pub source_digest: String,
}

/// An opened container. Cheap to clone; the archive bytes are shared.
#[derive(Clone)]
pub struct Container {
    manifest: ContainerManifest,
    bytes: Arc<[u8]>,
}

impl fmt::Debug for Container {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Container")
            .field("manifest", &self.manifest)
            .field("len", &self.bytes.len())
            .finish()
    }
}

/// Hex SHA-256 of a byte buffer.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Opens `path` for reading only and indexes the archive.
pub fn open_container(path: impl AsRef<Path>) -> Result<Container, ContainerError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ContainerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Container::from_bytes(bytes)
}

impl Container {
    pub fn from_bytes(bytes: impl Into<Arc<[u8]>>) -> Result<Self, ContainerError> {
        let bytes: Arc<[u8]> = bytes.into();
        let source_digest = sha256_hex(&bytes);
        let mut archive = ZipArchive::new(Cursor::new(&bytes[..]))
            .map_err(|e| ContainerError::NotAZipArchive(e.to_string()))?;
        let part_names: Vec<String> = archive.file_names().map(str::to_owned).collect();
        if !part_names.iter().any(|n| n == CONTENT_PART) {
            return Err(ContainerError::MissingContentPart);
        }
        if let Ok(entry) = archive.by_name(CONTENT_PART) {
            if entry.encrypted() {
                return Err(ContainerError::Encrypted(CONTENT_PART.into()));
            }
        }
        let settings_part = part_names.iter().find(|n| *n == SETTINGS_PART).cloned();
        let container = Container {
            manifest: ContainerManifest {
                part_names,
                content_part: CONTENT_PART.into(),
                settings_part,
                source_digest,
            },
            bytes,
        };
        container.check_odf_encryption()?;
        Ok(container)
    }

    pub fn manifest(&self) -> &ContainerManifest {
        &self.manifest
    }

    /// Raw bytes of one archive entry.
    pub fn read_part_bytes(&self, part: &str) -> Result<Vec<u8>, ContainerError> {
        if !self.manifest.part_names.iter().any(|n| n == part) {
            return Err(ContainerError::UnknownPart(part.into()));
        }
        let mut archive = ZipArchive::new(Cursor::new(&self.bytes[..]))
            .map_err(|e| ContainerError::NotAZipArchive(e.to_string()))?;
        let unreadable = |reason: String| ContainerError::UnreadableEntry {
            part: part.into(),
            reason,
        };
        let mut entry = archive
            .by_name(part)
            .map_err(|e| unreadable(e.to_string()))?;
        if entry.encrypted() {
            return Err(ContainerError::Encrypted(part.into()));
        }
        let mut out = Vec::with_capacity(entry.size() as usize);
        entry
            .read_to_end(&mut out)
            .map_err(|e| unreadable(e.to_string()))?;
        Ok(out)
    }

    /// Parses one entry as XML and normalizes its namespaces.
    pub fn read_part(&self, part: &str) -> Result<XmlTree, ContainerError> {
        let bytes = self.read_part_bytes(part)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| ContainerError::MalformedXml {
            part: part.into(),
            offset: e.valid_up_to(),
            message: "entry is not valid UTF-8".into(),
        })?;
        XmlTree::parse(text).map_err(|(offset, message)| ContainerError::MalformedXml {
            part: part.into(),
            offset,
            message,
        })
    }

    pub fn content(&self) -> Result<XmlTree, ContainerError> {
        self.read_part(&self.manifest.content_part.clone())
    }

    pub fn settings(&self) -> Result<Option<XmlTree>, ContainerError> {
        match self.manifest.settings_part.clone() {
            Some(p) => self.read_part(&p).map(Some),
            None => Ok(None),
        }
    }

    // ODF encryption is declared in the manifest rather than in the zip headers.
    fn check_odf_encryption(&self) -> Result<(), ContainerError> {
        if !self.manifest.part_names.iter().any(|n| n == MANIFEST_PART) {
            return Ok(());
        }
        let Ok(tree) = self.read_part(MANIFEST_PART) else {
            return Ok(());
        };
        for entry in tree.root.children_named("file-entry") {
            if entry.attr("full-path") == Some(CONTENT_PART)
                && entry.children_named("encryption-data").next().is_some()
            {
                return Err(ContainerError::Encrypted(CONTENT_PART.into()));
            }
        }
        Ok(())
    }
}

/// Vocabularies the document model cares about, independent of which URI
/// family spelled them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Namespace {
    Office,
    Table,
    Text,
    Style,
    Fo,
    Number,
    Meta,
    Config,
    Manifest,
    Dc,
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NamespaceFamily {
    /// OASIS OpenDocument 1.x (`.ods`).
    Odf,
    /// OpenOffice.org 1.0 (`.sxc`).
    OpenOffice1,
    /// Neither family was seen on the root element.
    Unknown,
}

const NAMESPACE_URIS: &[(&str, Namespace, NamespaceFamily)] = &[
    (
        "urn:oasis:names:tc:opendocument:xmlns:office:1.0",
        Namespace::Office,
        NamespaceFamily::Odf,
    ),
    (
        "urn:oasis:names:tc:opendocument:xmlns:table:1.0",
        Namespace::Table,
        NamespaceFamily::Odf,
    ),
    (
        "urn:oasis:names:tc:opendocument:xmlns:text:1.0",
        Namespace::Text,
        NamespaceFamily::Odf,
    ),
    (
        "urn:oasis:names:tc:opendocument:xmlns:style:1.0",
        Namespace::Style,
        NamespaceFamily::Odf,
    ),
    (
        "urn:oasis:names:tc:opendocument:xmlns:xsl-fo-compatible:1.0",
        Namespace::Fo,
        NamespaceFamily::Odf,
    ),
    (
        "urn:oasis:names:tc:opendocument:xmlns:datastyle:1.0",
        Namespace::Number,
        NamespaceFamily::Odf,
    ),
    (
        "urn:oasis:names:tc:opendocument:xmlns:meta:1.0",
        Namespace::Meta,
        NamespaceFamily::Odf,
    ),
    (
        "urn:oasis:names:tc:opendocument:xmlns:config:1.0",
        Namespace::Config,
        NamespaceFamily::Odf,
    ),
    (
        "urn:oasis:names:tc:opendocument:xmlns:manifest:1.0",
        Namespace::Manifest,
        NamespaceFamily::Odf,
    ),
    (
        "http://openoffice.org/2000/office",
        Namespace::Office,
        NamespaceFamily::OpenOffice1,
    ),
    (
        "http://openoffice.org/2000/table",
        Namespace::Table,
        NamespaceFamily::OpenOffice1,
    ),
    (
        "http://openoffice.org/2000/text",
        Namespace::Text,
        NamespaceFamily::OpenOffice1,
    ),
    (
        "http://openoffice.org/2000/style",
        Namespace::Style,
        NamespaceFamily::OpenOffice1,
    ),
    (
        "http://www.w3.org/1999/XSL/Format",
        Namespace::Fo,
        NamespaceFamily::OpenOffice1,
    ),
    (
        "http://openoffice.org/2000/datastyle",
        Namespace::Number,
        NamespaceFamily::OpenOffice1,
    ),
    (
        "http://openoffice.org/2000/meta",
        Namespace::Meta,
        NamespaceFamily::OpenOffice1,
    ),
    (
        "http://openoffice.org/2001/config",
        Namespace::Config,
        NamespaceFamily::OpenOffice1,
    ),
    (
        "http://openoffice.org/2001/manifest",
        Namespace::Manifest,
        NamespaceFamily::OpenOffice1,
    ),
    (
        "http://purl.org/dc/elements/1.1/",
        Namespace::Dc,
        NamespaceFamily::Unknown,
    ),
];

fn classify_uri(uri: &str) -> (Namespace, NamespaceFamily) {
    NAMESPACE_URIS
        .iter()
        .find(|(u, _, _)| *u == uri)
        .map(|(_, ns, fam)| (ns.clone(), *fam))
        .unwrap_or_else(|| (Namespace::Other(uri.to_owned()), NamespaceFamily::Unknown))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct XmlAttribute {
    pub ns: Option<Namespace>,
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum XmlNode {
    Element(XmlElement),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct XmlElement {
    pub ns: Option<Namespace>,
    pub name: String,
    pub attributes: Vec<XmlAttribute>,
    pub children: Vec<XmlNode>,
}

/// A parsed part. Equality ignores which URI family the file used.
#[derive(Debug, Clone, Serialize)]
pub struct XmlTree {
    pub root: XmlElement,
    pub family: NamespaceFamily,
}

impl PartialEq for XmlTree {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl XmlTree {
    /// Parses XML text. Errors carry the byte offset of the failure.
    pub fn parse(text: &str) -> Result<XmlTree, (usize, String)> {
        let opts = roxmltree::ParsingOptions {
            allow_dtd: true,
            ..Default::default()
        };
        let doc = roxmltree::Document::parse_with_options(text, opts).map_err(|e| {
            // Errors found at end of input report position 1:1.
            let offset = match e {
                roxmltree::Error::UnclosedRootNode | roxmltree::Error::UnexpectedEndOfStream => {
                    text.len()
                }
                _ => byte_offset(text, e.pos()),
            };
            (offset, e.to_string())
        })?;
        let root = doc.root_element();
        let family = root
            .tag_name()
            .namespace()
            .map(|u| classify_uri(u).1)
            .unwrap_or(NamespaceFamily::Unknown);
        Ok(XmlTree {
            root: convert(root),
            family,
        })
    }
}

fn byte_offset(text: &str, pos: roxmltree::TextPos) -> usize {
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if i + 1 == pos.row as usize {
            let col = pos.col.saturating_sub(1) as usize;
            return offset
                + line
                    .char_indices()
                    .nth(col)
                    .map(|(b, _)| b)
                    .unwrap_or(line.len());
        }
        offset += line.len();
    }
    text.len()
}

fn convert(node: roxmltree::Node<'_, '_>) -> XmlElement {
    let tag = node.tag_name();
    let attributes = node
        .attributes()
        .map(|a| XmlAttribute {
            ns: a.namespace().map(|u| classify_uri(u).0),
            name: a.name().to_owned(),
            value: a.value().to_owned(),
        })
        .collect();
    let children = node
        .children()
        .filter_map(|c| {
            if c.is_element() {
                Some(XmlNode::Element(convert(c)))
            } else if c.is_text() {
                c.text().map(|t| XmlNode::Text(t.to_owned()))
            } else {
                None
            }
        })
        .collect();
    XmlElement {
        ns: tag.namespace().map(|u| classify_uri(u).0),
        name: tag.name().to_owned(),
        attributes,
        children,
    }
}

impl XmlElement {
    /// Attribute by local name, any namespace.
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.value.as_str())
    }

    pub fn elements(&self) -> impl Iterator<Item = &XmlElement> {
        self.children.iter().filter_map(|c| match c {
            XmlNode::Element(e) => Some(e),
            XmlNode::Text(_) => None,
        })
    }

    pub fn children_named<'a>(
        &'a self,
        name: &'a str,
    ) -> impl Iterator<Item = &'a XmlElement> + 'a {
        self.elements().filter(move |e| e.name == name)
    }

    pub fn child(&self, name: &str) -> Option<&XmlElement> {
        self.elements().find(|e| e.name == name)
    }

    /// First descendant (depth-first, self excluded) with the given local name.
    pub fn find(&self, name: &str) -> Option<&XmlElement> {
        for e in self.elements() {
            if e.name == name {
                return Some(e);
            }
            if let Some(found) = e.find(name) {
                return Some(found);
            }
        }
        None
    }

    /// Concatenated character data of all descendants.
    pub fn text(&self) -> String {
        let mut out = String::new();
        collect_text(self, &mut out);
        out
    }
}

fn collect_text(e: &XmlElement, out: &mut String) {
    for c in &e.children {
        match c {
            XmlNode::Text(t) => out.push_str(t),
            XmlNode::Element(child) => collect_text(child, out),
        }
    }
}
