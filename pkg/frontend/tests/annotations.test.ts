import { describe, expect, it } from "vitest";

import { AnnotationStore, CLASSES, parseAnnotations, TARGET_PER_CLASS } from "../src/annotations.js";

describe("placing points", () => {
  it("appends in image coordinates under the active class", () => {
    const store = new AnnotationStore();
    store.activeClass = "parchment";
    expect(store.place(41, 12)).toBe(true);
    expect(store.points).toEqual([{ cls: "parchment", x: 41, y: 12 }]);
  });

  it("refuses duplicates of the same class and position", () => {
    const store = new AnnotationStore();
    expect(store.place(5, 5)).toBe(true);
    expect(store.place(5, 5)).toBe(false);
    expect(store.points.length).toBe(1);
    // same spot, different class is a distinct annotation
    expect(store.place(5, 5, "overwriting")).toBe(true);
  });

  it("refuses fractional and negative coordinates", () => {
    const store = new AnnotationStore();
    expect(store.place(1.5, 2)).toBe(false);
    expect(store.place(-1, 2)).toBe(false);
    expect(store.points.length).toBe(0);
  });

  it("counts every declared class, zeros included", () => {
    const store = new AnnotationStore();
    store.place(1, 1, "underwriting");
    store.place(2, 2, "underwriting");
    store.place(3, 3, "both");
    expect(store.counts()).toEqual({ underwriting: 2, overwriting: 0, parchment: 0, both: 1 });
  });

  it("tracks the 50-point guidance target", () => {
    expect(TARGET_PER_CLASS).toBe(50);
    const store = new AnnotationStore();
    for (let i = 0; i < 50; i++) store.place(i, 0, "underwriting");
    expect(store.counts().underwriting).toBe(50);
  });
});

describe("removing points", () => {
  it("removes the nearest point within the radius", () => {
    const store = new AnnotationStore();
    store.place(10, 10, "underwriting");
    store.place(30, 30, "parchment");
    const removed = store.removeNearest(12, 11, 6);
    expect(removed).toEqual({ cls: "underwriting", x: 10, y: 10 });
    expect(store.points.length).toBe(1);
  });

  it("leaves state alone when nothing is near", () => {
    const store = new AnnotationStore();
    store.place(10, 10, "underwriting");
    expect(store.removeNearest(100, 100, 6)).toBeNull();
    expect(store.points.length).toBe(1);
  });
});

describe("serialization", () => {
  it("emits the canonical CSV: header, empty-class directives, rows in order", () => {
    const store = new AnnotationStore();
    store.place(41, 12, "underwriting");
    store.place(80, 63, "parchment");
    store.place(7, 9, "underwriting");
    expect(store.serialize()).toBe(
      "class,x,y\n" +
        "#class:overwriting\n" +
        "#class:both\n" +
        "underwriting,41,12\n" +
        "parchment,80,63\n" +
        "underwriting,7,9\n",
    );
  });

  it("round-trips through parse exactly", () => {
    const store = new AnnotationStore();
    store.place(1, 2, "underwriting");
    store.place(3, 4, "overwriting");
    store.place(5, 6, "both");
    const text = store.serialize();
    const twin = new AnnotationStore();
    twin.load(text);
    expect(twin.points).toEqual(store.points);
    expect(twin.serialize()).toBe(text);
  });

  it("a fresh store exports only declarations", () => {
    const store = new AnnotationStore();
    expect(store.serialize()).toBe(
      "class,x,y\n#class:underwriting\n#class:overwriting\n#class:parchment\n#class:both\n",
    );
  });
});

describe("parsing", () => {
  it("accepts header, comments, blank lines and directives", () => {
    const parsed = parseAnnotations(
      "# source: test\n\nclass,x,y\n#class:empty_one\nink,3,4\n ink , 5 , 6 \n",
    );
    expect(parsed.classNames).toEqual(["empty_one", "ink"]);
    expect(parsed.points).toEqual([
      { cls: "ink", x: 3, y: 4 },
      { cls: "ink", x: 5, y: 6 },
    ]);
    expect(parsed.provenance).toEqual({ source: "test" });
  });

  it("collapses duplicate triples", () => {
    const parsed = parseAnnotations("a,1,1\na,1,1\na,1,2\n");
    expect(parsed.points.length).toBe(2);
  });

  it("names the offending line, counting comments and blanks", () => {
    expect(() => parseAnnotations("class,x,y\n# note\nink,nan,3\n")).toThrow(/line 3/);
    expect(() => parseAnnotations("ink,1\n")).toThrow(/line 1.*expected 'class,x,y'/);
    expect(() => parseAnnotations("ink,-1,3\n")).toThrow(/negative/);
    expect(() => parseAnnotations("#class:\n")).toThrow(/empty #class/);
    expect(() => parseAnnotations("\n# nothing\n")).toThrow(/no classes/);
  });

  it("import keeps unknown classes usable", () => {
    const store = new AnnotationStore();
    store.load("class,x,y\nrubric,4,5\n");
    expect(store.classByName("rubric")).toBeDefined();
    expect(store.points).toEqual([{ cls: "rubric", x: 4, y: 5 }]);
  });
});

describe("palette", () => {
  it("covers the four manuscript classes with distinct colors", () => {
    expect(CLASSES.map((c) => c.name)).toEqual(["underwriting", "overwriting", "parchment", "both"]);
    expect(new Set(CLASSES.map((c) => c.color)).size).toBe(CLASSES.length);
  });
});
